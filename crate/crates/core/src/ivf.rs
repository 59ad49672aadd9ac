//! Inverted file over a coarse k-means partition, with a PQ index of the
//! residuals `x − c` in every cell.
//!
//! Container layout, little-endian:
//!
//! ```text
//! "PCPQIVF1"
//! u32 version, n, d, kbar
//! kbar × d f32       coarse centers
//! kbar × (u32 count, count × u32 ids)
//! kbar × (u64 len, len bytes)   "PCPQIDX1" index, or "PCPQRAW1" u32 n u32 d n×d f32
//! ```

use rayon::prelude::*;

use crate::clustering::{kmeans_pp, SolverOptions};
use crate::config::{InitMode, Method, PQConfig};
use crate::dataset::{pad_vector, Dataset};
use crate::error::{Error, FormatError, Result};
use crate::eval::top_n;
use crate::matrix::{dot_f32, Matrix};
use crate::pq_index::PQIndex;
use crate::rng::{derive_seed, stream};

pub const MAGIC: &[u8; 8] = b"PCPQIVF1";
pub const RAW_MAGIC: &[u8; 8] = b"PCPQRAW1";
pub const VERSION: u32 = 1;

/// Coarse cell assignment of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsePartition {
    /// `kbar × d`, row-major.
    pub centers: Vec<f32>,
    pub members: Vec<Vec<u32>>,
}

/// Encoder of one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum SubIndex {
    Pq(PQIndex),
    /// Cells with fewer than two points keep their residuals verbatim.
    Raw {
        d: usize,
        residuals: Vec<f32>,
    },
}

impl SubIndex {
    fn len(&self) -> usize {
        match self {
            SubIndex::Pq(p) => p.n,
            SubIndex::Raw { d, residuals } => residuals.len() / d,
        }
    }

    pub fn is_raw(&self) -> bool {
        matches!(self, SubIndex::Raw { .. })
    }

    /// Residual scores of every member, in member order.
    fn scores(&self, q: &[f32]) -> Result<Vec<f32>> {
        match self {
            SubIndex::Pq(p) => p.score_all(q),
            SubIndex::Raw { d, residuals } => {
                Ok(residuals.chunks(*d).map(|r| dot_f32(r, q)).collect())
            }
        }
    }

    fn serialize(&self) -> Vec<u8> {
        match self {
            SubIndex::Pq(p) => p.serialize(),
            SubIndex::Raw { d, residuals } => {
                let mut out = Vec::with_capacity(16 + 4 * residuals.len());
                out.extend_from_slice(RAW_MAGIC);
                out.extend_from_slice(&((residuals.len() / d) as u32).to_le_bytes());
                out.extend_from_slice(&(*d as u32).to_le_bytes());
                for v in residuals {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
        }
    }

    fn deserialize(bytes: &[u8], base: usize) -> Result<SubIndex> {
        if !bytes.starts_with(RAW_MAGIC) {
            return Ok(SubIndex::Pq(PQIndex::deserialize(bytes)?));
        }
        let header = |i: usize| -> std::result::Result<usize, FormatError> {
            bytes
                .get(8 + 4 * i..12 + 4 * i)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or(FormatError::Truncated {
                    offset: base + bytes.len(),
                })
        };
        let (n, d) = (header(0)?, header(1)?);
        if d == 0 {
            return Err(FormatError::InvalidHeader("raw cell with d = 0".into()).into());
        }
        let want = n
            .checked_mul(d)
            .and_then(|v| v.checked_mul(4))
            .and_then(|v| v.checked_add(16));
        match want {
            Some(w) if w == bytes.len() => {}
            Some(w) if w > bytes.len() => {
                return Err(FormatError::Truncated {
                    offset: base + bytes.len(),
                }
                .into())
            }
            Some(w) => return Err(FormatError::TrailingBytes(bytes.len() - w).into()),
            None => return Err(FormatError::InvalidHeader("raw cell size overflows".into()).into()),
        }
        let residuals = bytes[16..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(SubIndex::Raw { d, residuals })
    }
}

/// Result of one probed query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// `(id, score)`, best first, ties by lower id.
    pub hits: Vec<(u32, f32)>,
    /// Number of points scored.
    pub candidates: usize,
    /// Fewer candidates than requested.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IVFIndex {
    pub n: usize,
    pub d: usize,
    pub coarse_centers: Vec<f32>,
    pub members: Vec<Vec<u32>>,
    pub sub_indexes: Vec<SubIndex>,
    /// Build parameters; absent after deserialization.
    pub config: Option<PQConfig>,
}

/// k-means++ over the raw vectors; cells are ℓ₂ Voronoi regions.
pub fn coarse_partition(data: &Dataset, kbar: usize, config: &PQConfig) -> Result<CoarsePartition> {
    if kbar == 0 || kbar > data.n() {
        return Err(Error::InvalidConfig(format!(
            "kbar = {kbar} must be between 1 and n = {}",
            data.n()
        )));
    }
    let points = Matrix::from_f32(data.n(), data.d(), data.as_slice());
    let opts = SolverOptions {
        max_iters: config.max_iters,
        tol: config.tol,
        seed: derive_seed(config.seed, &[stream::COARSE]),
        init: InitMode::Seeding,
        ..Default::default()
    };
    let model = kmeans_pp(&points, kbar, &opts)?;
    let mut members = vec![Vec::new(); kbar];
    for (i, &c) in model.assignment.iter().enumerate() {
        members[c as usize].push(i as u32);
    }
    Ok(CoarsePartition {
        centers: model.centers.as_slice().iter().map(|&v| v as f32).collect(),
        members,
    })
}

impl IVFIndex {
    pub fn build(data: &Dataset, kbar: usize, config: &PQConfig) -> Result<IVFIndex> {
        let partition = coarse_partition(data, kbar, config)?;
        Self::from_partition(data, &partition, config)
    }

    /// Encodes the residuals of a precomputed partition. Sharing one
    /// partition across methods isolates the effect of the cell encoder.
    pub fn from_partition(
        data: &Dataset,
        partition: &CoarsePartition,
        config: &PQConfig,
    ) -> Result<IVFIndex> {
        let d = data.d();
        let kbar = partition.members.len();
        if partition.centers.len() != kbar * d {
            return Err(Error::DimensionMismatch {
                expected: kbar * d,
                found: partition.centers.len(),
            });
        }
        check_partition(&partition.members, data.n()).map_err(Error::InvalidData)?;
        let sub_indexes = partition
            .members
            .par_iter()
            .enumerate()
            .map(|(c, ids)| {
                let center = &partition.centers[c * d..(c + 1) * d];
                let mut residuals = Vec::with_capacity(ids.len() * d);
                for &i in ids {
                    residuals.extend(data.row(i as usize).iter().zip(center).map(|(x, y)| x - y));
                }
                if ids.len() < 2 {
                    return Ok(SubIndex::Raw { d, residuals });
                }
                let cell = Dataset::new(ids.len(), d, residuals, format!("cell {c}"))?;
                let mut sub = config.clone();
                sub.k = config.k.min(ids.len());
                sub.seed = derive_seed(config.seed, &[stream::CLUSTER, c as u64]);
                Ok(SubIndex::Pq(PQIndex::build(&cell, &sub)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IVFIndex {
            n: data.n(),
            d,
            coarse_centers: partition.centers.clone(),
            members: partition.members.clone(),
            sub_indexes,
            config: Some(config.clone()),
        })
    }

    pub fn kbar(&self) -> usize {
        self.members.len()
    }

    pub fn method(&self) -> Option<Method> {
        self.config.as_ref().map(|c| c.method).or_else(|| {
            self.sub_indexes.iter().find_map(|s| match s {
                SubIndex::Pq(p) => Some(p.method()),
                SubIndex::Raw { .. } => None,
            })
        })
    }

    pub fn coarse_center(&self, c: usize) -> &[f32] {
        &self.coarse_centers[c * self.d..(c + 1) * self.d]
    }

    fn check_query(&self, q: &[f32]) -> Result<Vec<f32>> {
        if q.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: q.len(),
            });
        }
        Ok(pad_vector(q, self.d))
    }

    /// Approximate score of every point: `⟨q, c⟩ + residual score`.
    pub fn score_all(&self, q: &[f32]) -> Result<Vec<f32>> {
        let q = self.check_query(q)?;
        let mut out = vec![0.0f32; self.n];
        for (c, ids) in self.members.iter().enumerate() {
            let coarse = dot_f32(self.coarse_center(c), &q);
            for (&id, s) in ids.iter().zip(self.sub_indexes[c].scores(&q)?) {
                out[id as usize] = coarse + s;
            }
        }
        Ok(out)
    }

    /// Scores the `k_probe` cells whose centers have the largest inner
    /// product with `q` and returns the best `top` points among them.
    pub fn query(&self, q: &[f32], k_probe: usize, top: usize) -> Result<QueryResult> {
        let q = self.check_query(q)?;
        if k_probe == 0 || k_probe > self.kbar() {
            return Err(Error::InvalidConfig(format!(
                "k_probe = {k_probe} must be between 1 and {}",
                self.kbar()
            )));
        }
        let coarse: Vec<(u32, f32)> = (0..self.kbar())
            .map(|c| (c as u32, dot_f32(self.coarse_center(c), &q)))
            .collect();
        let probed = top_n(coarse, k_probe);
        let mut candidates = Vec::new();
        for (c, coarse) in probed {
            let c = c as usize;
            for (&id, s) in self.members[c].iter().zip(self.sub_indexes[c].scores(&q)?) {
                candidates.push((id, coarse + s));
            }
        }
        let scored = candidates.len();
        Ok(QueryResult {
            hits: top_n(candidates, top),
            candidates: scored,
            short: scored < top,
        })
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.n as u32, self.d as u32, self.kbar() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.coarse_centers {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for ids in &self.members {
            out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
            for id in ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
        }
        for sub in &self.sub_indexes {
            let blob = sub.serialize();
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            out.extend_from_slice(&blob);
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<IVFIndex> {
        let mut pos = 0usize;
        let mut take = |len: usize| -> std::result::Result<(usize, &[u8]), FormatError> {
            let end = pos.checked_add(len).filter(|&e| e <= bytes.len());
            let end = end.ok_or(FormatError::Truncated {
                offset: bytes.len(),
            })?;
            let start = pos;
            pos = end;
            Ok((start, &bytes[start..end]))
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
        if take(8).map(|(_, b)| b != MAGIC).unwrap_or(true) {
            return Err(FormatError::BadMagic {
                expected: "PCPQIVF1",
            }
            .into());
        }
        let version = u32_at(take(4)?.1);
        if version != VERSION as usize {
            return Err(FormatError::UnsupportedVersion(version as u32).into());
        }
        let (n, d, kbar) = (u32_at(take(4)?.1), u32_at(take(4)?.1), u32_at(take(4)?.1));
        if n == 0 || d == 0 || kbar == 0 || kbar > n {
            return Err(
                FormatError::InvalidHeader(format!("n = {n}, d = {d}, kbar = {kbar}")).into(),
            );
        }
        let centers_len = kbar.checked_mul(d).and_then(|v| v.checked_mul(4));
        let centers_len =
            centers_len.ok_or_else(|| FormatError::InvalidHeader("header overflows".into()))?;
        let coarse_centers = take(centers_len)?
            .1
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let mut members = Vec::with_capacity(kbar);
        for _ in 0..kbar {
            let count = u32_at(take(4)?.1);
            let (offset, raw) = take(count.checked_mul(4).ok_or(FormatError::Truncated {
                offset: bytes.len(),
            })?)?;
            let ids: Vec<u32> = raw
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if let Some(&bad) = ids.iter().find(|&&id| id as usize >= n) {
                return Err(FormatError::CodeOutOfRange {
                    what: "member id",
                    value: bad as u64,
                    limit: n as u64,
                    offset,
                }
                .into());
            }
            members.push(ids);
        }
        check_partition(&members, n).map_err(FormatError::InvalidHeader)?;
        let mut sub_indexes = Vec::with_capacity(kbar);
        for ids in &members {
            let len = u64::from_le_bytes(take(8)?.1.try_into().unwrap());
            let len = usize::try_from(len).map_err(|_| FormatError::Truncated {
                offset: bytes.len(),
            })?;
            let (offset, blob) = take(len)?;
            let sub = SubIndex::deserialize(blob, offset)?;
            let sub_d = match &sub {
                SubIndex::Pq(p) => p.d,
                SubIndex::Raw { d, .. } => *d,
            };
            if sub.len() != ids.len() || sub_d != d {
                return Err(FormatError::InvalidHeader(format!(
                    "cell at byte {offset} holds {} points of dimension {sub_d}, expected {} of {d}",
                    sub.len(),
                    ids.len()
                ))
                .into());
            }
            sub_indexes.push(sub);
        }
        if pos != bytes.len() {
            return Err(FormatError::TrailingBytes(bytes.len() - pos).into());
        }
        Ok(IVFIndex {
            n,
            d,
            coarse_centers,
            members,
            sub_indexes,
            config: None,
        })
    }
}

/// Every id in `0..n` appears in exactly one cell.
fn check_partition(members: &[Vec<u32>], n: usize) -> std::result::Result<(), String> {
    let mut seen = vec![false; n];
    for &id in members.iter().flatten() {
        let slot = seen
            .get_mut(id as usize)
            .ok_or_else(|| format!("member id {id} out of range"))?;
        if *slot {
            return Err(format!("member id {id} appears twice"));
        }
        *slot = true;
    }
    match seen.iter().position(|&s| !s) {
        Some(missing) => Err(format!("point {missing} belongs to no cell")),
        None => Ok(()),
    }
}

/// Free-function form of [`IVFIndex::build`].
pub fn build_ivf(data: &Dataset, kbar: usize, config: &PQConfig) -> Result<IVFIndex> {
    IVFIndex::build(data, kbar, config)
}
