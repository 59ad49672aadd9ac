//! `.fvecs` / `.ivecs` readers and writers.
//!
//! Record layout: little-endian `i32` dimension, then that many
//! little-endian 4-byte values. All records in a file share one dimension.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use pcpq::{Dataset, Error, FormatError, Result};

fn records<'a>(bytes: &'a [u8], what: &str) -> Result<(usize, Vec<&'a [u8]>)> {
    let mut out = Vec::new();
    let mut dim = None;
    let mut offset = 0;
    while offset < bytes.len() {
        let head = bytes
            .get(offset..offset + 4)
            .ok_or(FormatError::Truncated {
                offset: bytes.len(),
            })?;
        let raw = i32::from_le_bytes(head.try_into().unwrap());
        if raw <= 0 {
            return Err(Error::InvalidData(format!(
                "{what}: dimension {raw} at byte {offset}"
            )));
        }
        let d = raw as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::InvalidData(format!(
                    "{what}: dimension {d} at byte {offset}, expected {expected}"
                )))
            }
            _ => {}
        }
        let body = bytes
            .get(offset + 4..offset + 4 + 4 * d)
            .ok_or(FormatError::Truncated {
                offset: bytes.len(),
            })?;
        out.push(body);
        offset += 4 + 4 * d;
    }
    Ok((dim.unwrap_or(0), out))
}

pub fn parse_fvecs(bytes: &[u8], source: &str) -> Result<Dataset> {
    let (d, recs) = records(bytes, source)?;
    if recs.is_empty() {
        return Err(Error::EmptyInput("fvecs file has no records"));
    }
    let data = recs
        .iter()
        .flat_map(|r| r.chunks_exact(4))
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Dataset::new(recs.len(), d, data, source)
}

/// `-1` marks an empty slot and is dropped.
pub fn parse_ivecs(bytes: &[u8], source: &str) -> Result<Vec<Vec<u32>>> {
    let (_, recs) = records(bytes, source)?;
    let mut offset = 0;
    recs.iter()
        .map(|r| {
            offset += 4;
            let row = r
                .chunks_exact(4)
                .enumerate()
                .filter(|(_, b)| i32::from_le_bytes((*b).try_into().unwrap()) != -1)
                .map(|(i, b)| {
                    let v = i32::from_le_bytes(b.try_into().unwrap());
                    u32::try_from(v).map_err(|_| {
                        Error::InvalidData(format!(
                            "{source}: negative id {v} at byte {}",
                            offset + 4 * i
                        ))
                    })
                })
                .collect();
            offset += r.len();
            row
        })
        .collect()
}

pub fn encode_fvecs(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.n() * (4 + 4 * data.d()));
    for row in data.rows() {
        out.extend_from_slice(&(row.len() as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Rows shorter than the longest one are padded with `-1`, which
/// [`parse_ivecs`] drops.
pub fn encode_ivecs(rows: &[Vec<u32>]) -> Vec<u8> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let mut out = Vec::with_capacity(rows.len() * 4 * (width + 1));
    for row in rows {
        out.extend_from_slice(&(width as i32).to_le_bytes());
        for slot in 0..width {
            let v = row.get(slot).map_or(-1, |&id| id as i32);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_fvecs(path: &Path) -> Result<Dataset> {
    parse_fvecs(&fs::read(path)?, &path.display().to_string())
}

pub fn read_ivecs(path: &Path) -> Result<Vec<Vec<u32>>> {
    parse_ivecs(&fs::read(path)?, &path.display().to_string())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_fvecs(data: &Dataset, path: &Path) -> Result<()> {
    write_bytes(path, &encode_fvecs(data))
}

pub fn write_ivecs(rows: &[Vec<u32>], path: &Path) -> Result<()> {
    write_bytes(path, &encode_ivecs(rows))
}
