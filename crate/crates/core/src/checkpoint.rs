//! On-disk model container shared by the quantum and classical families.
//!
//! Layout: magic `QCKP`, version u32, JSON header length u32, header bytes,
//! parameter count u64, then the raw little-endian f64 parameter block.
//! The header is free-form JSON carrying a `family` tag plus whatever the
//! family needs to rebuild itself; parameters round-trip bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: Map<String, Value>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    /// Read a required header field, with context in the error.
    pub fn field(&self, key: &str) -> Result<&Value> {
        self.header
            .get(key)
            .ok_or_else(|| Error::Format(format!("checkpoint header missing `{key}`")))
    }

    pub fn field_u64(&self, key: &str) -> Result<u64> {
        self.field(key)?
            .as_u64()
            .ok_or_else(|| Error::Format(format!("checkpoint header `{key}` is not an integer")))
    }

    pub fn field_f64(&self, key: &str) -> Result<f64> {
        self.field(key)?
            .as_f64()
            .ok_or_else(|| Error::Format(format!("checkpoint header `{key}` is not a number")))
    }

    pub fn field_str(&self, key: &str) -> Result<&str> {
        self.field(key)?
            .as_str()
            .ok_or_else(|| Error::Format(format!("checkpoint header `{key}` is not a string")))
    }
}

pub fn save(path: &Path, header: &Map<String, Value>, params: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header_bytes = serde_json::to_vec(header)
        .map_err(|e| Error::Format(format!("cannot serialize checkpoint header: {e}")))?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a model checkpoint (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version} not supported (expected {VERSION})"
        )));
    }
    r.read_exact(&mut u32buf)?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Map<String, Value> = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("corrupt checkpoint header: {e}")))?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    let mut params = Vec::with_capacity(count);
    let mut f64buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut f64buf)?;
        params.push(f64::from_le_bytes(f64buf));
    }
    Ok(Checkpoint { header, params })
}
