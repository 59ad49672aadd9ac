//! Binary index format, little-endian throughout:
//!
//! ```text
//! "PCPQIDX1"
//! u32 version, method, n, d, padded_d, m, k, s
//! f64 t
//! m × k × d̄ f32     centers
//! m × s f32          scalar codebooks
//! n rows of          m center codes, then m scalar codes (or m f32 raw scalars when s = 0)
//! ```
//!
//! Codes take 0 bytes when there is at most one value to choose from, then
//! 1, 2 or 4 bytes as needed.

use super::PQIndex;
use crate::config::{Method, PQConfig};
use crate::error::{FormatError, Result};

pub const MAGIC: &[u8; 8] = b"PCPQIDX1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 8 * 4 + 8;

/// Bytes per code for an alphabet of `count` values.
pub fn code_width(count: usize) -> usize {
    match count {
        0 | 1 => 0,
        2..=256 => 1,
        257..=65536 => 2,
        _ => 4,
    }
}

fn put_code(out: &mut Vec<u8>, value: u32, width: usize) {
    match width {
        0 => {}
        1 => out.push(value as u8),
        2 => out.extend_from_slice(&(value as u16).to_le_bytes()),
        _ => out.extend_from_slice(&value.to_le_bytes()),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(FormatError::Truncated {
                offset: self.buf.len(),
            }),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> std::result::Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn code(
        &mut self,
        width: usize,
        what: &'static str,
        limit: usize,
    ) -> std::result::Result<u32, FormatError> {
        let offset = self.pos;
        let value = match width {
            0 => 0,
            1 => self.take(1)?[0] as u32,
            2 => u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as u32,
            _ => self.u32()?,
        };
        if value as u64 >= limit as u64 {
            return Err(FormatError::CodeOutOfRange {
                what,
                value: value as u64,
                limit: limit as u64,
                offset,
            });
        }
        Ok(value)
    }
}

impl PQIndex {
    /// Bytes per stored point.
    pub fn row_bytes(&self) -> usize {
        let m = self.m();
        m * code_width(self.k())
            + if self.is_raw() {
                4 * m
            } else {
                m * code_width(self.s())
            }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let (m, k, s) = (self.m(), self.k(), self.s());
        let mut out = Vec::with_capacity(
            HEADER_LEN + 4 * m * (k * self.dbar() + s) + self.n * self.row_bytes(),
        );
        out.extend_from_slice(MAGIC);
        for v in [
            VERSION,
            self.method().id(),
            self.n as u32,
            self.d as u32,
            self.padded_d as u32,
            m as u32,
            k as u32,
            s as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.t.to_le_bytes());
        for v in self
            .codebooks
            .iter()
            .chain(&self.scalar_codebooks)
            .flatten()
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let (kw, sw) = (code_width(k), code_width(s));
        for i in 0..self.n {
            for &c in &self.center_codes[i * m..(i + 1) * m] {
                put_code(&mut out, c, kw);
            }
            if self.is_raw() {
                for v in &self.raw_scalars[i * m..(i + 1) * m] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            } else {
                for &c in &self.scalar_codes[i * m..(i + 1) * m] {
                    put_code(&mut out, c, sw);
                }
            }
        }
        out
    }

    /// Parses and validates a serialized index.
    pub fn deserialize(bytes: &[u8]) -> Result<PQIndex> {
        Ok(parse(bytes)?)
    }
}

fn parse(bytes: &[u8]) -> std::result::Result<PQIndex, FormatError> {
    let bad = |msg: String| FormatError::InvalidHeader(msg);
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).map_err(|_| FormatError::BadMagic {
        expected: "PCPQIDX1",
    })? != MAGIC
    {
        return Err(FormatError::BadMagic {
            expected: "PCPQIDX1",
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let method_id = r.u32()?;
    let method =
        Method::from_id(method_id).ok_or_else(|| bad(format!("unknown method id {method_id}")))?;
    let [n, d, padded_d, m, k, s] =
        [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
    let t = r.f64()?;
    if n == 0 || d == 0 || m == 0 {
        return Err(bad(format!("n = {n}, d = {d}, m = {m} must be positive")));
    }
    if padded_d % m != 0 || padded_d < d || padded_d - d >= m {
        return Err(bad(format!(
            "padded_d = {padded_d} inconsistent with d = {d}, m = {m}"
        )));
    }
    if k < 2 {
        return Err(bad(format!("k = {k} must be at least 2")));
    }
    if !method.is_projective() && s != 1 {
        return Err(bad(format!(
            "{} stores exactly one scalar, header says {s}",
            method.name()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(bad(format!(
            "threshold {t} must be finite and non-negative"
        )));
    }
    let dbar = padded_d / m;
    let raw = s == 0;
    let row = m * code_width(k) + if raw { 4 * m } else { m * code_width(s) };
    let needed = m
        .checked_mul(k)
        .and_then(|v| v.checked_mul(dbar))
        .and_then(|v| v.checked_add(m.checked_mul(s)?))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(n.checked_mul(row)?))
        .ok_or_else(|| bad("payload size overflows".into()))?;
    if bytes.len() - r.pos < needed {
        return Err(FormatError::Truncated {
            offset: bytes.len(),
        });
    }

    let mut codebooks = Vec::with_capacity(m);
    for _ in 0..m {
        codebooks.push(
            (0..k * dbar)
                .map(|_| r.f32())
                .collect::<std::result::Result<Vec<_>, _>>()?,
        );
    }
    let mut scalar_codebooks = Vec::with_capacity(m);
    for _ in 0..m {
        let values = (0..s)
            .map(|_| r.f32())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if !method.is_projective() && values != [1.0] {
            return Err(bad(format!(
                "{} scalar codebook must be [1.0]",
                method.name()
            )));
        }
        if !raw {
            scalar_codebooks.push(values);
        }
    }
    let (kw, sw) = (code_width(k), code_width(s));
    let mut center_codes = Vec::with_capacity(n * m);
    let mut scalar_codes = Vec::with_capacity(if raw { 0 } else { n * m });
    let mut raw_scalars = Vec::with_capacity(if raw { n * m } else { 0 });
    for _ in 0..n {
        for _ in 0..m {
            center_codes.push(r.code(kw, "center", k)?);
        }
        for _ in 0..m {
            if raw {
                raw_scalars.push(r.f32()?);
            } else {
                scalar_codes.push(r.code(sw, "scalar", s)?);
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
    }
    let mut config = PQConfig::new(method, m, k);
    config.quantize_scalars = !raw;
    if !raw {
        config.s = s;
    }
    Ok(PQIndex {
        config,
        n,
        d,
        padded_d,
        t,
        codebooks,
        scalar_codebooks,
        center_codes,
        scalar_codes,
        raw_scalars,
        train_loss: Vec::new(),
        scalar_loss: Vec::new(),
    })
}
