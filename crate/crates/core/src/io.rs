//! Line-delimited JSON helpers and little-endian binary primitives shared by
//! the artifact formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First line of a generated JSONL artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Header {
    pub fn new(format: &str, version: u32, config_hash: Option<&str>) -> Self {
        Self {
            format: format.to_string(),
            version,
            config_hash: config_hash.map(str::to_string),
        }
    }
}

/// Non-blank lines with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_header(line: &str) -> Option<Header> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    if value.get("format").is_some() {
        serde_json::from_value(value).ok()
    } else {
        None
    }
}

/// Reads a JSONL file, returning its optional header and decoded records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Header>, Vec<T>)> {
    let lines = read_lines(path)?;
    let mut header = None;
    let mut records = Vec::with_capacity(lines.len());
    for (k, (line_no, line)) in lines.iter().enumerate() {
        if k == 0 {
            if let Some(h) = parse_header(line) {
                header = Some(h);
                continue;
            }
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: *line_no,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok((header, records))
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: Option<&Header>, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(h) = header {
        serde_json::to_writer(&mut w, h).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_str(r: &mut impl Read) -> Result<String> {
    let n = read_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid utf-8 string: {e}")))
}

/// Fixed 64-byte slot holding an ASCII config hash (zero padded).
pub(crate) fn write_hash_slot(w: &mut impl Write, hash: Option<&str>) -> Result<()> {
    let mut slot = [0u8; 64];
    if let Some(h) = hash {
        let bytes = h.as_bytes();
        let n = bytes.len().min(64);
        slot[..n].copy_from_slice(&bytes[..n]);
    }
    w.write_all(&slot)?;
    Ok(())
}

pub(crate) fn read_hash_slot(r: &mut impl Read) -> Result<Option<String>> {
    let mut slot = [0u8; 64];
    r.read_exact(&mut slot)?;
    let end = slot.iter().position(|&b| b == 0).unwrap_or(64);
    if end == 0 {
        return Ok(None);
    }
    String::from_utf8(slot[..end].to_vec())
        .map(Some)
        .map_err(|e| Error::Format(format!("invalid config hash: {e}")))
}
