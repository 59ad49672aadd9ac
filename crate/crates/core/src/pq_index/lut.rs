use serde::{Deserialize, Serialize};

use super::PQIndex;
use crate::dataset::pad_vector;
use crate::error::Result;

/// Receives operation counts from the scoring path. The unit type ignores
/// them and compiles away.
pub trait Tally {
    fn multiply_add(&mut self, _count: u64) {}
    fn multiply(&mut self, _count: u64) {}
    fn lookup(&mut self, _count: u64) {}
    fn add(&mut self, _count: u64) {}
}

impl Tally for () {}

/// Operation counts observed on the scoring path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub multiply_adds: u64,
    pub multiplications: u64,
    pub lookups: u64,
    pub additions: u64,
}

impl Tally for OpCounter {
    fn multiply_add(&mut self, count: u64) {
        self.multiply_adds += count;
    }

    fn multiply(&mut self, count: u64) {
        self.multiplications += count;
    }

    fn lookup(&mut self, count: u64) {
        self.lookups += count;
    }

    fn add(&mut self, count: u64) {
        self.additions += count;
    }
}

impl std::ops::AddAssign for OpCounter {
    fn add_assign(&mut self, o: Self) {
        self.multiply_adds += o.multiply_adds;
        self.multiplications += o.multiplications;
        self.lookups += o.lookups;
        self.additions += o.additions;
    }
}

/// Per-query tables: `eta[j][c] = ⟨C⁽ʲ⁾[c], qⱼ⟩` and
/// `eta_lambda[j][c][l] = eta[j][c] · λ⁽ʲ⁾_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    pub m: usize,
    pub k: usize,
    pub s: usize,
    /// `m × k`, section-major.
    pub eta: Vec<f32>,
    /// `m × k × s`; empty when scalars are raw.
    pub eta_lambda: Vec<f32>,
}

impl LookupTable {
    #[inline]
    pub fn eta(&self, j: usize, c: usize) -> f32 {
        self.eta[j * self.k + c]
    }

    #[inline]
    pub fn entry(&self, j: usize, c: usize, l: usize) -> f32 {
        self.eta_lambda[(j * self.k + c) * self.s + l]
    }
}

impl PQIndex {
    pub fn lookup_table(&self, q: &[f32]) -> Result<LookupTable> {
        self.lookup_table_with(q, &mut ())
    }

    /// Builds the tables for `q`, given in original or padded coordinates.
    ///
    /// Costs `k·d` multiply-adds, plus `s·k·m` multiplications when the index
    /// has a scalar stage.
    pub fn lookup_table_with<T: Tally>(&self, q: &[f32], tally: &mut T) -> Result<LookupTable> {
        self.check_query(q.len())?;
        let q = pad_vector(q, self.padded_d);
        let (m, k, dbar) = (self.m(), self.k(), self.dbar());
        // Entries accumulate in f64 and are rounded once on storage.
        let mut wide = Vec::with_capacity(m * k);
        for j in 0..m {
            let qj = &q[j * dbar..(j + 1) * dbar];
            for c in 0..k {
                let center = self.center(j, c);
                let mut acc = 0.0f64;
                for (&a, &b) in center.iter().zip(qj) {
                    acc += a as f64 * b as f64;
                }
                tally.multiply_add(dbar as u64);
                wide.push(acc);
            }
        }
        let eta: Vec<f32> = wide.iter().map(|&e| e as f32).collect();
        let s = self.s();
        let unit = !self.config.method.is_projective();
        let eta_lambda = if self.is_raw() {
            Vec::new()
        } else if unit {
            // λ ≡ 1: the scalar stage is skipped.
            eta.clone()
        } else {
            let mut out = Vec::with_capacity(m * k * s);
            for j in 0..m {
                let lambdas = &self.scalar_codebooks[j];
                for c in 0..k {
                    let e = wide[j * k + c];
                    out.extend(lambdas.iter().map(|&l| (e * l as f64) as f32));
                    tally.multiply(s as u64);
                }
            }
            out
        };
        Ok(LookupTable {
            m,
            k,
            s: if self.is_raw() { 0 } else { s },
            eta,
            eta_lambda,
        })
    }

    /// One point's score: `m` table reads summed in section order.
    #[inline]
    pub(crate) fn score_point<T: Tally>(&self, lut: &LookupTable, i: usize, tally: &mut T) -> f32 {
        let m = self.m();
        let codes = &self.center_codes[i * m..(i + 1) * m];
        if self.is_raw() {
            let alphas = &self.raw_scalars[i * m..(i + 1) * m];
            let mut acc = lut.eta(0, codes[0] as usize) * alphas[0];
            tally.lookup(1);
            tally.multiply(1);
            for j in 1..m {
                acc += lut.eta(j, codes[j] as usize) * alphas[j];
                tally.lookup(1);
                tally.multiply(1);
                tally.add(1);
            }
            return acc;
        }
        let scalars = &self.scalar_codes[i * m..(i + 1) * m];
        let mut acc = lut.entry(0, codes[0] as usize, scalars[0] as usize);
        tally.lookup(1);
        for j in 1..m {
            acc += lut.entry(j, codes[j] as usize, scalars[j] as usize);
            tally.lookup(1);
            tally.add(1);
        }
        acc
    }
}
