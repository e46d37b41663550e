//! Dataset handling: IDX-format ingestion (the MNIST-family container),
//! deterministic area-average downscaling, seeded synthetic datasets, subset
//! selection, and a binary cache that round-trips bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::Classifier;
use crate::encoding::PixelVector;
use crate::error::{Error, Result};

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const CACHE_MAGIC: &[u8; 4] = b"QDST";
const CACHE_VERSION: u32 = 1;

/// Labeled grayscale images, all the same size, pixels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<PixelVector>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub split: String,
}

impl Dataset {
    pub fn new(
        images: Vec<PixelVector>,
        labels: Vec<usize>,
        class_count: usize,
        split: impl Into<String>,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} images with {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| **l >= class_count) {
            return Err(Error::Data(format!(
                "label {bad} out of range for a {class_count}-class dataset"
            )));
        }
        Ok(Dataset { images, labels, class_count, split: split.into() })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// (width, height) shared by every image.
    pub fn image_dims(&self) -> Result<(usize, usize)> {
        let first = self
            .images
            .first()
            .ok_or_else(|| Error::Data("empty dataset has no image dimensions".into()))?;
        let dims = (first.width(), first.height());
        if self.images.iter().any(|i| (i.width(), i.height()) != dims) {
            return Err(Error::Data("dataset mixes image sizes".into()));
        }
        Ok(dims)
    }

    /// Fraction of examples the model labels correctly.
    pub fn accuracy(&self, model: &dyn Classifier) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::DegenerateInput("accuracy over an empty dataset".into()));
        }
        let hits: Vec<bool> = self
            .images
            .par_iter()
            .zip(self.labels.par_iter())
            .map(|(x, &y)| Ok(model.predict(x)? == y))
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|h| **h).count() as f64 / self.len() as f64)
    }
}

/// Big-endian u32 reader that reports the byte offset on failure.
struct OffsetReader<R: Read> {
    inner: R,
    offset: usize,
    path: String,
}

impl<R: Read> OffsetReader<R> {
    fn new(inner: R, path: &Path) -> Self {
        OffsetReader { inner, offset: 0, path: path.display().to_string() }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|_| {
            Error::Format(format!(
                "{} truncated: wanted {} bytes at offset {}",
                self.path,
                buf.len(),
                self.offset
            ))
        })?;
        self.offset += buf.len();
        Ok(())
    }

    fn read_u32_be(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_exact(&mut buf)?;
        Ok(u32::from_be_bytes(buf))
    }
}

/// Load an IDX image/label file pair into a dataset with pixels scaled to
/// [0, 1]. `class_count` bounds the legal labels (10 for the MNIST family).
pub fn load_idx(images_path: &Path, labels_path: &Path, class_count: usize) -> Result<Dataset> {
    let mut ir = OffsetReader::new(BufReader::new(File::open(images_path)?), images_path);
    let magic = ir.read_u32_be()?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{} has magic {magic:#010x} at offset 0, expected {IDX_IMAGE_MAGIC:#010x} (IDX images)",
            images_path.display()
        )));
    }
    let count = ir.read_u32_be()? as usize;
    let rows = ir.read_u32_be()? as usize;
    let cols = ir.read_u32_be()? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!(
            "{} declares {rows}x{cols} images",
            images_path.display()
        )));
    }
    let mut images = Vec::with_capacity(count);
    let mut raw = vec![0u8; rows * cols];
    for _ in 0..count {
        ir.read_exact(&mut raw)?;
        let values: Vec<f64> = raw.iter().map(|b| *b as f64 / 255.0).collect();
        images.push(PixelVector::new(values, cols, rows)?);
    }

    let mut lr = OffsetReader::new(BufReader::new(File::open(labels_path)?), labels_path);
    let magic = lr.read_u32_be()?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{} has magic {magic:#010x} at offset 0, expected {IDX_LABEL_MAGIC:#010x} (IDX labels)",
            labels_path.display()
        )));
    }
    let label_count = lr.read_u32_be()? as usize;
    if label_count != count {
        return Err(Error::Format(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let mut bytes = vec![0u8; label_count];
    lr.read_exact(&mut bytes)?;
    let labels: Vec<usize> = bytes.into_iter().map(|b| b as usize).collect();
    Dataset::new(images, labels, class_count, "idx")
}

/// Shrink every image to `width`×`height` by exact area-weighted averaging
/// (fractional source boxes handled, e.g. 28→8). Labels pass through.
pub fn downscale(dataset: &Dataset, width: usize, height: usize) -> Result<Dataset> {
    let (sw, sh) = dataset.image_dims()?;
    if width == 0 || height == 0 || width > sw || height > sh {
        return Err(Error::Config(format!(
            "cannot downscale {sw}x{sh} images to {width}x{height}"
        )));
    }
    let images: Vec<PixelVector> = dataset
        .images
        .iter()
        .map(|img| {
            let src = img.values();
            let mut out = Vec::with_capacity(width * height);
            let rx = sw as f64 / width as f64;
            let ry = sh as f64 / height as f64;
            for ty in 0..height {
                let y0 = ty as f64 * ry;
                let y1 = y0 + ry;
                for tx in 0..width {
                    let x0 = tx as f64 * rx;
                    let x1 = x0 + rx;
                    let mut acc = 0.0;
                    let mut sy = y0.floor() as usize;
                    while (sy as f64) < y1 && sy < sh {
                        let wy = (y1.min((sy + 1) as f64) - y0.max(sy as f64)).max(0.0);
                        let mut sx = x0.floor() as usize;
                        while (sx as f64) < x1 && sx < sw {
                            let wx = (x1.min((sx + 1) as f64) - x0.max(sx as f64)).max(0.0);
                            acc += wx * wy * src[sy * sw + sx];
                            sx += 1;
                        }
                        sy += 1;
                    }
                    out.push((acc / (rx * ry)).clamp(0.0, 1.0));
                }
            }
            PixelVector::new(out, width, height)
        })
        .collect::<Result<_>>()?;
    Dataset::new(images, dataset.labels.clone(), dataset.class_count, dataset.split.clone())
}

/// Linearly separable fixtures: class c lights up its own horizontal band.
pub fn synth_blobs(
    num_classes: usize,
    per_class: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || per_class == 0 || height < num_classes {
        return Err(Error::Config(format!(
            "cannot place {num_classes} class bands in {height} rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let band = (class * height / num_classes)..((class + 1) * height / num_classes);
        for _ in 0..per_class {
            let mut values = Vec::with_capacity(width * height);
            for y in 0..height {
                for _ in 0..width {
                    if band.contains(&y) {
                        values.push(rng.gen_range(0.75..0.95));
                    } else {
                        values.push(rng.gen_range(0.05..0.25));
                    }
                }
            }
            images.push(PixelVector::new(values, width, height)?);
            labels.push(class);
        }
    }
    Dataset::new(images, labels, num_classes, "synth-blobs")
}

/// 5×7 digit glyphs, row-major top to bottom.
const GLYPHS: [[u8; 7]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110], // 0
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // 1
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111], // 2
    [0b11110, 0b00001, 0b00001, 0b01110, 0b00001, 0b00001, 0b11110], // 3
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010], // 4
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110], // 5
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110], // 6
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000], // 7
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110], // 8
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100], // 9
];

/// Procedural handwritten-digit stand-in: fixed 5×7 glyphs with seeded
/// placement jitter and intensity noise. Needs at least a 5×7 canvas.
pub fn synth_digits(
    num_classes: usize,
    per_class: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || num_classes > 10 {
        return Err(Error::Config(format!("digit classes must be 1..=10, got {num_classes}")));
    }
    if width < 5 || height < 7 {
        return Err(Error::Config(format!(
            "{width}x{height} canvas too small for 5x7 glyphs"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let glyph = &GLYPHS[class];
        for _ in 0..per_class {
            let dx = rng.gen_range(0..=width - 5);
            let dy = rng.gen_range(0..=height - 7);
            let brightness: f64 = rng.gen_range(0.6..0.95);
            let mut values = vec![0.0; width * height];
            for v in &mut values {
                *v = rng.gen_range(0.0..0.12);
            }
            for (gy, row) in glyph.iter().enumerate() {
                for gx in 0..5 {
                    if row & (1 << (4 - gx)) != 0 {
                        let jitter = rng.gen_range(-0.05..0.05);
                        values[(dy + gy) * width + dx + gx] =
                            (brightness + jitter).clamp(0.0, 1.0);
                    }
                }
            }
            images.push(PixelVector::new(values, width, height)?);
            labels.push(class);
        }
    }
    Dataset::new(images, labels, num_classes, "synth-digits")
}

/// Seed-selected subset of `n` examples without replacement, in draw order.
pub fn select_subset(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n > dataset.len() {
        return Err(Error::Config(format!(
            "cannot select {n} of {} examples",
            dataset.len()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    indices.truncate(n);
    let images = indices.iter().map(|&i| dataset.images[i].clone()).collect();
    let labels = indices.iter().map(|&i| dataset.labels[i]).collect();
    Dataset::new(images, labels, dataset.class_count, dataset.split.clone())
}

/// Shuffled train/test split with `train_fraction` of examples in the first.
pub fn split_train_test(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (dataset.len() as f64 * train_fraction).round() as usize;
    let gather = |idx: &[usize], split: &str| -> Result<Dataset> {
        Dataset::new(
            idx.iter().map(|&i| dataset.images[i].clone()).collect(),
            idx.iter().map(|&i| dataset.labels[i]).collect(),
            dataset.class_count,
            split,
        )
    };
    Ok((gather(&indices[..cut], "train")?, gather(&indices[cut..], "test")?))
}

/// Write the dataset cache: magic, version, dims/counts, labels as u32 LE,
/// pixels as f64 LE.
pub fn save_cache(path: &Path, dataset: &Dataset) -> Result<()> {
    let (width, height) = dataset.image_dims()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    let split_bytes = dataset.split.as_bytes();
    w.write_all(&(split_bytes.len() as u32).to_le_bytes())?;
    w.write_all(split_bytes)?;
    w.write_all(&(dataset.class_count as u32).to_le_bytes())?;
    w.write_all(&(dataset.len() as u64).to_le_bytes())?;
    w.write_all(&(width as u32).to_le_bytes())?;
    w.write_all(&(height as u32).to_le_bytes())?;
    for label in &dataset.labels {
        w.write_all(&(*label as u32).to_le_bytes())?;
    }
    for image in &dataset.images {
        for v in image.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<Dataset> {
    let mut r = OffsetReader::new(BufReader::new(File::open(path)?), path);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a dataset cache (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("dataset cache version {version} not supported")));
    }
    r.read_exact(&mut u32buf)?;
    let split_len = u32::from_le_bytes(u32buf) as usize;
    let mut split_bytes = vec![0u8; split_len];
    r.read_exact(&mut split_bytes)?;
    let split = String::from_utf8(split_bytes)
        .map_err(|_| Error::Format("dataset cache split tag is not UTF-8".into()))?;
    r.read_exact(&mut u32buf)?;
    let class_count = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u32buf)?;
    let width = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let height = u32::from_le_bytes(u32buf) as usize;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut u32buf)?;
        labels.push(u32::from_le_bytes(u32buf) as usize);
    }
    let mut images = Vec::with_capacity(n);
    let mut f64buf = [0u8; 8];
    for _ in 0..n {
        let mut values = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            r.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        images.push(PixelVector::new(values, width, height)?);
    }
    Dataset::new(images, labels, class_count, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_idx_pair(
        dir: &Path,
        images: &[Vec<u8>],
        rows: usize,
        cols: usize,
        labels: &[u8],
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let img_path = dir.join("imgs.idx3-ubyte");
        let lbl_path = dir.join("lbls.idx1-ubyte");
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&(images.len() as u32).to_be_bytes());
        img.extend_from_slice(&(rows as u32).to_be_bytes());
        img.extend_from_slice(&(cols as u32).to_be_bytes());
        for i in images {
            img.extend_from_slice(i);
        }
        std::fs::write(&img_path, img).unwrap();
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        std::fs::write(&lbl_path, lbl).unwrap();
        (img_path, lbl_path)
    }

    #[test]
    fn idx_pair_loads_with_pixels_scaled_to_unit_range() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = write_idx_pair(
            dir.path(),
            &[vec![0, 255, 128, 64], vec![255, 255, 0, 0]],
            2,
            2,
            &[3, 9],
        );
        let ds = load_idx(&imgs, &lbls, 10).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image_dims().unwrap(), (2, 2));
        assert_eq!(ds.labels, vec![3, 9]);
        let v = ds.images[0].values();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0);
        assert!((v[2] - 128.0 / 255.0).abs() < 1e-15);
        assert!(ds.images.iter().all(|i| i.values().iter().all(|p| (0.0..=1.0).contains(p))));
    }

    #[test]
    fn truncated_idx_file_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = write_idx_pair(dir.path(), &[vec![10, 20, 30, 40]], 2, 2, &[1]);
        let full = std::fs::read(&imgs).unwrap();
        std::fs::write(&imgs, &full[..full.len() - 2]).unwrap();
        let err = load_idx(&imgs, &lbls, 10).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("offset"), "missing diagnostics: {err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = write_idx_pair(dir.path(), &[vec![0, 0, 0, 0]], 2, 2, &[0]);
        let mut bytes = std::fs::read(&imgs).unwrap();
        bytes[2] = 0x07;
        std::fs::write(&imgs, bytes).unwrap();
        let err = load_idx(&imgs, &lbls, 10).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn out_of_range_label_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = write_idx_pair(dir.path(), &[vec![0, 0, 0, 0]], 2, 2, &[17]);
        assert_eq!(load_idx(&imgs, &lbls, 10).unwrap_err().category(), "data");
    }

    #[test]
    fn image_label_count_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) =
            write_idx_pair(dir.path(), &[vec![0, 0, 0, 0], vec![1, 1, 1, 1]], 2, 2, &[1]);
        assert_eq!(load_idx(&imgs, &lbls, 10).unwrap_err().category(), "format");
    }

    #[test]
    fn two_by_two_block_averages_to_one_half() {
        let img = PixelVector::new(vec![0.0, 0.0, 1.0, 1.0], 2, 2).unwrap();
        let ds = Dataset::new(vec![img], vec![0], 1, "t").unwrap();
        let small = downscale(&ds, 1, 1).unwrap();
        assert_eq!(small.images[0].values(), &[0.5]);
    }

    #[test]
    fn constant_images_stay_constant_under_fractional_downscale() {
        let img = PixelVector::new(vec![0.7; 28 * 28], 28, 28).unwrap();
        let ds = Dataset::new(vec![img], vec![2], 4, "t").unwrap();
        let small = downscale(&ds, 8, 8).unwrap();
        assert_eq!(small.image_dims().unwrap(), (8, 8));
        assert_eq!(small.labels, vec![2]);
        for v in small.images[0].values() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn upscaling_is_a_config_error() {
        let img = PixelVector::new(vec![0.5; 4], 2, 2).unwrap();
        let ds = Dataset::new(vec![img], vec![0], 1, "t").unwrap();
        assert_eq!(downscale(&ds, 4, 4).unwrap_err().category(), "config");
    }

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let a = synth_blobs(4, 5, 8, 8, 42).unwrap();
        let b = synth_blobs(4, 5, 8, 8, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for c in 0..4 {
            assert_eq!(a.labels.iter().filter(|l| **l == c).count(), 5);
        }
        let c = synth_blobs(4, 5, 8, 8, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn blobs_are_separable_by_class_means() {
        let ds = synth_blobs(3, 10, 6, 6, 7).unwrap();
        let dim = 36;
        let mut means = vec![vec![0.0; dim]; 3];
        for (img, &label) in ds.images.iter().zip(&ds.labels) {
            for (m, v) in means[label].iter_mut().zip(img.values()) {
                *m += v / 10.0;
            }
        }
        for (img, &label) in ds.images.iter().zip(&ds.labels) {
            let mut best = (f64::INFINITY, usize::MAX);
            for (c, mean) in means.iter().enumerate() {
                let d: f64 =
                    img.values().iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, c);
                }
            }
            assert_eq!(best.1, label, "nearest-centroid misclassified a blob");
        }
    }

    #[test]
    fn digits_are_deterministic_and_well_formed() {
        let a = synth_digits(10, 3, 8, 8, 11).unwrap();
        let b = synth_digits(10, 3, 8, 8, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        assert!(a
            .images
            .iter()
            .all(|i| i.values().iter().all(|v| (0.0..=1.0).contains(v))));
        for c in 0..10 {
            assert_eq!(a.labels.iter().filter(|l| **l == c).count(), 3);
        }
        assert_eq!(synth_digits(3, 2, 4, 8, 0).unwrap_err().category(), "config");
    }

    #[test]
    fn subset_selection_is_seeded_and_keeps_pairs_aligned() {
        let ds = synth_digits(4, 10, 8, 8, 5).unwrap();
        let a = select_subset(&ds, 12, 99).unwrap();
        let b = select_subset(&ds, 12, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        for (img, &label) in a.images.iter().zip(&a.labels) {
            let i = ds.images.iter().position(|x| x == img).unwrap();
            assert_eq!(ds.labels[i], label);
        }
        assert_ne!(select_subset(&ds, 12, 100).unwrap(), a);
        assert_eq!(select_subset(&ds, 41, 0).unwrap_err().category(), "config");
    }

    #[test]
    fn train_test_split_partitions_the_dataset() {
        let ds = synth_blobs(2, 10, 6, 6, 3).unwrap();
        let (train, test) = split_train_test(&ds, 0.8, 17).unwrap();
        assert_eq!(train.len(), 16);
        assert_eq!(test.len(), 4);
        assert_eq!(train.split, "train");
        assert_eq!(test.split, "test");
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.qdst");
        let ds = synth_digits(5, 4, 8, 8, 21).unwrap();
        save_cache(&path, &ds).unwrap();
        let loaded = load_cache(&path).unwrap();
        assert_eq!(loaded.class_count, ds.class_count);
        assert_eq!(loaded.split, ds.split);
        assert_eq!(loaded.labels, ds.labels);
        for (a, b) in loaded.images.iter().zip(&ds.images) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn cache_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus");
        std::fs::write(&path, b"QATKnope").unwrap();
        assert_eq!(load_cache(&path).unwrap_err().category(), "format");
    }
}
