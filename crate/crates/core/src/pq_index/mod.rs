//! Product-quantization index over contiguous coordinate sections.
//!
//! Point `i` is reconstructed section by section as `λ_{γⱼ(i)} · C⁽ʲ⁾[φⱼ(i)]`.
//! Scoring a query builds one [`LookupTable`] and then costs `m` table
//! reads per point.

mod format;
mod lut;

pub use format::{code_width, MAGIC, VERSION};
pub use lut::{LookupTable, OpCounter, Tally};

use rayon::prelude::*;

use crate::clustering::{
    aniso_projective_k_clustering, anisotropic_k_clustering, kmeans_pp, point_weights,
    projective_k_clustering, ClusterModel, SolverOptions,
};
use crate::config::{validate_config, Method, PQConfig, ScalarMode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{norm_sq, Matrix};
use crate::rng::{derive_seed, stream};
use crate::scalar_quant::{quantize_anisotropic, quantize_projective};

/// Splits the rows of `data` into `m` contiguous blocks of `d / m` coordinates.
pub fn split_sections(data: &Dataset, m: usize) -> Result<Vec<Matrix>> {
    let d = data.d();
    if m == 0 || !d.is_multiple_of(m) {
        return Err(Error::InvalidConfig(format!(
            "{d} coordinates do not split into {m} sections"
        )));
    }
    let dbar = d / m;
    Ok((0..m)
        .map(|j| {
            let mut values = Vec::with_capacity(data.n() * dbar);
            for row in data.rows() {
                values.extend(row[j * dbar..(j + 1) * dbar].iter().map(|&v| v as f64));
            }
            Matrix::from_vec(data.n(), dbar, values)
        })
        .collect())
}

/// Built index. Codes are stored per point, section-major within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct PQIndex {
    /// Build parameters. After deserialization only the stored fields
    /// (method, m, k, s, quantization) are meaningful.
    pub config: PQConfig,
    pub n: usize,
    pub d: usize,
    pub padded_d: usize,
    pub t: f64,
    /// `m` blocks of `k × d̄` centers, row-major.
    pub codebooks: Vec<Vec<f32>>,
    /// `m` blocks of scalar values; `[1.0]` for non-projective methods and
    /// empty when scalars are stored raw.
    pub scalar_codebooks: Vec<Vec<f32>>,
    /// `n × m` center codes.
    pub center_codes: Vec<u32>,
    /// `n × m` scalar codes; empty when scalars are stored raw.
    pub scalar_codes: Vec<u32>,
    /// `n × m` unquantized scalars; empty unless stored raw.
    pub raw_scalars: Vec<f32>,
    /// Final solver loss per section.
    pub train_loss: Vec<f64>,
    /// Scalar quantization loss per section (zero without a scalar stage).
    pub scalar_loss: Vec<f64>,
}

struct Section {
    centers: Matrix,
    codes: Vec<u32>,
    scalar_values: Vec<f32>,
    scalar_codes: Vec<u32>,
    raw: Vec<f32>,
    loss: f64,
    scalar_loss: f64,
}

fn section_mean_norm(x: &Matrix) -> f64 {
    x.iter_rows().map(|r| norm_sq(r).sqrt()).sum::<f64>() / x.rows().max(1) as f64
}

fn build_section(x: &Matrix, config: &PQConfig, j: usize) -> Result<Section> {
    let opts = SolverOptions {
        max_iters: config.max_iters,
        tol: config.tol,
        seed: derive_seed(config.seed, &[stream::SECTION, j as u64]),
        init: config.init,
        ..Default::default()
    };
    let weights = if config.method.is_anisotropic() {
        Some(point_weights(
            x,
            config.t_frac * section_mean_norm(x),
            config.threshold,
        )?)
    } else {
        None
    };
    let k = config.k;
    let model: ClusterModel = match config.method {
        Method::Kmeans => kmeans_pp(x, k, &opts)?,
        Method::Pcpq => projective_k_clustering(x, k, &opts)?,
        Method::Aniso => {
            anisotropic_k_clustering(x, k, weights.as_deref().unwrap_or_default(), &opts)?
        }
        Method::Apcpq => {
            aniso_projective_k_clustering(x, k, weights.as_deref().unwrap_or_default(), &opts)?
        }
    };
    let scalar_seed = derive_seed(config.seed, &[stream::SCALARS, j as u64]);
    let n = x.rows();
    let (scalar_values, scalar_codes, raw, scalar_loss) = match config.scalar_mode() {
        ScalarMode::Unit => (vec![1.0], vec![0; n], Vec::new(), 0.0),
        ScalarMode::Raw => (
            Vec::new(),
            Vec::new(),
            model.alphas.iter().map(|&a| a as f32).collect(),
            0.0,
        ),
        ScalarMode::Quantized(s) => {
            let q = match (config.method, &weights) {
                (Method::Apcpq, Some(w)) => {
                    quantize_anisotropic(x, &model.centers, &model.assignment, w, s, scalar_seed)?
                }
                _ => quantize_projective(&model.alphas, s, scalar_seed)?,
            };
            let mut values: Vec<f32> = q.codebook.values.iter().map(|&v| v as f32).collect();
            // Fewer distinct scalars than codes: pad so every section stores s values.
            let last = *values.last().expect("codebook is never empty");
            values.resize(s, last);
            (values, q.codes, Vec::new(), q.quant_loss)
        }
    };
    Ok(Section {
        loss: model.loss(),
        centers: model.centers,
        codes: model.assignment,
        scalar_values,
        scalar_codes,
        raw,
        scalar_loss,
    })
}

impl PQIndex {
    /// Clusters every section with the configured solver and quantizes the
    /// scalars.
    pub fn build(data: &Dataset, config: &PQConfig) -> Result<PQIndex> {
        let resolved = validate_config(config, data)?;
        if data.n() < config.k {
            return Err(Error::InvalidConfig(format!(
                "k = {} exceeds the {} points available",
                config.k,
                data.n()
            )));
        }
        let padded = data.padded(resolved.padded_d);
        let sections = split_sections(&padded, config.m)?;
        let built: Vec<Section> = sections
            .par_iter()
            .enumerate()
            .map(|(j, x)| build_section(x, config, j))
            .collect::<Result<_>>()?;

        let (n, m) = (data.n(), config.m);
        let mut index = PQIndex {
            config: config.clone(),
            n,
            d: data.d(),
            padded_d: resolved.padded_d,
            t: resolved.t,
            codebooks: Vec::with_capacity(m),
            scalar_codebooks: Vec::with_capacity(m),
            center_codes: vec![0; n * m],
            scalar_codes: Vec::new(),
            raw_scalars: Vec::new(),
            train_loss: Vec::with_capacity(m),
            scalar_loss: Vec::with_capacity(m),
        };
        let raw = config.scalar_mode() == ScalarMode::Raw;
        if raw {
            index.raw_scalars = vec![0.0; n * m];
        } else {
            index.scalar_codes = vec![0; n * m];
        }
        for (j, s) in built.into_iter().enumerate() {
            index
                .codebooks
                .push(s.centers.as_slice().iter().map(|&v| v as f32).collect());
            if !raw {
                index.scalar_codebooks.push(s.scalar_values);
            }
            for i in 0..n {
                index.center_codes[i * m + j] = s.codes[i];
                if raw {
                    index.raw_scalars[i * m + j] = s.raw[i];
                } else {
                    index.scalar_codes[i * m + j] = s.scalar_codes[i];
                }
            }
            index.train_loss.push(s.loss);
            index.scalar_loss.push(s.scalar_loss);
        }
        Ok(index)
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn dbar(&self) -> usize {
        self.padded_d / self.config.m
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    /// Number of stored scalar values per section: 1 for non-projective
    /// methods, 0 when scalars are raw.
    pub fn s(&self) -> usize {
        self.scalar_codebooks.first().map_or(0, Vec::len)
    }

    pub fn is_raw(&self) -> bool {
        self.scalar_codebooks.is_empty()
    }

    pub fn center(&self, j: usize, c: usize) -> &[f32] {
        let dbar = self.dbar();
        &self.codebooks[j][c * dbar..(c + 1) * dbar]
    }

    /// Scalar applied to point `i` in section `j`.
    pub fn scalar(&self, i: usize, j: usize) -> f32 {
        let at = i * self.m() + j;
        if self.is_raw() {
            self.raw_scalars[at]
        } else {
            self.scalar_codebooks[j][self.scalar_codes[at] as usize]
        }
    }

    /// Reconstruction of point `i` in padded coordinates.
    pub fn reconstruct(&self, i: usize) -> Vec<f32> {
        let m = self.m();
        let mut out = Vec::with_capacity(self.padded_d);
        for j in 0..m {
            let lambda = self.scalar(i, j);
            let c = self.center(j, self.center_codes[i * m + j] as usize);
            out.extend(c.iter().map(|v| lambda * v));
        }
        out
    }

    /// Σᵢ ‖xᵢ − x̂ᵢ‖² against the original data.
    pub fn reconstruction_loss(&self, data: &Dataset) -> Result<f64> {
        self.check_query(data.d())?;
        if data.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: data.n(),
            });
        }
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| {
                let r = self.reconstruct(i);
                let x = data.row(i);
                r.iter()
                    .enumerate()
                    .map(|(c, &v)| {
                        let xv = x.get(c).copied().unwrap_or(0.0) as f64;
                        (xv - v as f64).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum())
    }

    /// Information content of the code arrays:
    /// `n·m·(⌈log₂k⌉ + ⌈log₂s⌉)` bits, with 32 bits per raw scalar.
    pub fn code_payload_bits(&self) -> u64 {
        let ceil_log2 = |v: usize| {
            if v <= 1 {
                0
            } else {
                (usize::BITS - (v - 1).leading_zeros()) as u64
            }
        };
        let scalar_bits = if self.is_raw() {
            32
        } else {
            ceil_log2(self.s())
        };
        (self.n * self.m()) as u64 * (ceil_log2(self.k()) + scalar_bits)
    }

    fn check_query(&self, len: usize) -> Result<()> {
        if len != self.d && len != self.padded_d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: len,
            });
        }
        Ok(())
    }

    /// Approximate inner product of `q` with every stored point.
    pub fn score_all(&self, q: &[f32]) -> Result<Vec<f32>> {
        let lut = self.lookup_table(q)?;
        Ok(self.scan(&lut))
    }

    /// [`PQIndex::score_all`] with every arithmetic operation and table read counted.
    pub fn score_all_counted(&self, q: &[f32], counter: &mut OpCounter) -> Result<Vec<f32>> {
        let lut = self.lookup_table_with(q, counter)?;
        Ok((0..self.n)
            .map(|i| self.score_point(&lut, i, counter))
            .collect())
    }

    /// Approximate inner product of `q` with point `i`.
    pub fn score_one(&self, lut: &LookupTable, i: usize) -> f32 {
        self.score_point(lut, i, &mut ())
    }

    /// Scores every point against a prepared table.
    pub fn scan(&self, lut: &LookupTable) -> Vec<f32> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.score_point(lut, i, &mut ()))
            .collect()
    }

    /// Exact inner product of `q` with every reconstruction, accumulated in f64.
    pub fn dense_scores(&self, q: &[f32]) -> Result<Vec<f64>> {
        self.check_query(q.len())?;
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| {
                self.reconstruct(i)
                    .iter()
                    .zip(q)
                    .map(|(&r, &qv)| r as f64 * qv as f64)
                    .sum()
            })
            .collect())
    }
}

/// Free-function form of [`PQIndex::build`].
pub fn build_pq_index(data: &Dataset, config: &PQConfig) -> Result<PQIndex> {
    PQIndex::build(data, config)
}
