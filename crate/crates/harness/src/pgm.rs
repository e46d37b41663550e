//! Binary PGM (P5) emission for perturbation galleries: per attacked example
//! an original, a signed delta scaled symmetrically around mid-gray, and the
//! perturbed image.

use std::fs;
use std::path::{Path, PathBuf};

use qadv_core::attack::AttackSet;
use qadv_core::{Error, Result};

/// Write an 8-bit binary PGM.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Format(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes)?;
    Ok(())
}

/// Read an 8-bit binary PGM written by `write_pgm` (or any plain P5 file).
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("{}: truncated pgm header", path.display())));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| Error::Format(format!("{}: non-ascii pgm header", path.display())))?
                .to_string(),
        );
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("{}: not a binary pgm (P5)", path.display())));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("{}: bad pgm header field '{s}'", path.display())))
    };
    let width = parse(&fields[1])?;
    let height = parse(&fields[2])?;
    let maxval = parse(&fields[3])?;
    if maxval != 255 {
        return Err(Error::Format(format!("{}: only maxval 255 supported", path.display())));
    }
    pos += 1; // single whitespace byte after maxval
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} pixel bytes, found {}",
            path.display(),
            bytes.len().saturating_sub(pos)
        )));
    }
    Ok((width, height, bytes[pos..pos + expected].to_vec()))
}

/// Quantize unit-interval pixels to 8-bit gray.
pub fn quantize_unit(values: &[f64]) -> Vec<u8> {
    values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

/// Quantize a signed delta symmetrically: 0 → mid-gray (128), the largest
/// |δ| → a display extreme (0 or 255). An all-zero delta is all mid-gray.
pub fn quantize_delta(delta: &[f64]) -> Vec<u8> {
    let max = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let scale = if max > 0.0 { max } else { 1.0 };
    delta.iter().map(|d| (127.5 + 127.5 * d / scale).round().clamp(0.0, 255.0) as u8).collect()
}

/// Emit original/delta/perturbed PGM triplets for up to `max_examples`
/// attacked images; returns the written paths.
pub fn export_perturbations(
    set: &AttackSet,
    dir: &Path,
    max_examples: usize,
) -> Result<Vec<PathBuf>> {
    if set.examples.is_empty() {
        return Err(Error::DegenerateInput("attack set has no examples to export".into()));
    }
    let mut written = Vec::new();
    for (i, ex) in set.examples.iter().take(max_examples).enumerate() {
        let (w, h) = (ex.original.width(), ex.original.height());
        let triplet = [
            ("original", quantize_unit(ex.original.values())),
            ("delta", quantize_delta(&ex.delta)),
            ("perturbed", quantize_unit(ex.perturbed.values())),
        ];
        for (role, pixels) in triplet {
            let path = dir.join(format!("ex{i:03}_{role}.pgm"));
            write_pgm(&path, w, h, &pixels)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        write_pgm(&path, 4, 3, &pixels).unwrap();
        let (w, h, back) = read_pgm(&path).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(back, pixels);
    }

    #[test]
    fn delta_scaling_maps_extremes_and_zero() {
        let q = quantize_delta(&[0.1, -0.1, 0.0, 0.05]);
        assert_eq!(q[0], 255, "max positive delta must hit the display extreme");
        assert_eq!(q[1], 0, "max negative delta must hit the display extreme");
        assert_eq!(q[2], 128, "zero delta must be mid-gray");
        let flat = quantize_delta(&[0.0, 0.0, 0.0]);
        assert!(flat.iter().all(|&v| v == 128), "all-zero delta renders mid-gray");
    }

    #[test]
    fn unit_quantization_clamps() {
        assert_eq!(quantize_unit(&[0.0, 1.0, 0.5, 1.2, -0.3]), vec![0, 255, 128, 255, 0]);
    }

    #[test]
    fn rejects_wrong_pixel_count_and_bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        assert!(write_pgm(&path, 2, 2, &[1, 2, 3]).is_err());
        std::fs::write(&path, b"P2\n2 2\n255\n").unwrap();
        assert_eq!(read_pgm(&path).unwrap_err().category(), "format");
        std::fs::write(&path, b"P5\n2 2\n255\nab").unwrap();
        assert_eq!(read_pgm(&path).unwrap_err().category(), "format");
    }
}
