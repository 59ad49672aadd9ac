//! Quantization of the per-point scalars of one section to `s` values.
//!
//! Projective sections snap their projection coefficients with 1-D k-means.
//! Anisotropic projective sections pick the codes minimizing the anisotropic
//! loss directly: with the center fixed, each point's loss is a quadratic
//! `wλ² + aλ + b` in its scalar.

use rayon::prelude::*;

use crate::clustering::{aniso_quadratic, AnisoWeights};
use crate::error::{Error, Result};
use crate::matrix::{norm_sq, Matrix};
use crate::numerics::{kmeans_1d, minimize_quadratic_scalars, Quadratic, ScalarCodebook};

/// Scalar codebook of one section with the code of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedScalars {
    pub codebook: ScalarCodebook,
    pub codes: Vec<u32>,
    pub quant_loss: f64,
}

impl QuantizedScalars {
    pub fn value(&self, i: usize) -> f64 {
        self.codebook.values[self.codes[i] as usize]
    }
}

/// 1-D k-means over the section's projection coefficients.
pub fn quantize_projective(alphas: &[f64], s: usize, seed: u64) -> Result<QuantizedScalars> {
    let codebook = kmeans_1d(alphas, s, seed)?;
    Ok(QuantizedScalars {
        codes: codebook.assignment.clone(),
        quant_loss: codebook.objective,
        codebook,
    })
}

/// Per-point loss coefficients of `λ·c_{assignment(i)}`; `None` for points
/// whose loss does not depend on λ.
pub fn scalar_quadratics(
    points: &Matrix,
    centers: &Matrix,
    assignment: &[u32],
    weights: &[AnisoWeights],
) -> Result<Vec<Option<Quadratic>>> {
    if assignment.len() != points.rows() || weights.len() != points.rows() {
        return Err(Error::DimensionMismatch {
            expected: points.rows(),
            found: assignment.len().min(weights.len()),
        });
    }
    (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let xx = norm_sq(x);
            let j = assignment[i] as usize;
            if j >= centers.rows() {
                return Err(Error::InvalidData(format!("assignment {j} out of range")));
            }
            if xx == 0.0 || weights[i].is_zero() {
                return Ok(None);
            }
            let q = aniso_quadratic(x, xx, centers.row(j), weights[i]);
            if q.w < 0.0 || !q.w.is_finite() {
                return Err(Error::NonConvexQuadratic(q.w));
            }
            // w = 0 forces a = 0: the loss is flat in λ.
            Ok((q.w > 1e-30).then_some(q))
        })
        .collect()
}

/// Scalar codes minimizing the section's anisotropic loss for fixed centers
/// and assignment. Points with a flat loss take code 0.
pub fn quantize_anisotropic(
    points: &Matrix,
    centers: &Matrix,
    assignment: &[u32],
    weights: &[AnisoWeights],
    s: usize,
    seed: u64,
) -> Result<QuantizedScalars> {
    let quads = scalar_quadratics(points, centers, assignment, weights)?;
    let active: Vec<Quadratic> = quads.iter().flatten().copied().collect();
    let codebook = if active.is_empty() {
        if s == 0 {
            return Err(Error::InvalidConfig("s must be at least 1".into()));
        }
        ScalarCodebook {
            values: vec![0.0],
            assignment: Vec::new(),
            objective: 0.0,
            trace: vec![0.0],
        }
    } else {
        minimize_quadratic_scalars(&active, s, seed)?
    };
    let mut codes = Vec::with_capacity(quads.len());
    let mut next = codebook.assignment.iter();
    let mut quant_loss = 0.0;
    for (i, q) in quads.iter().enumerate() {
        match q {
            Some(q) => {
                let code = *next.next().expect("one code per active point");
                quant_loss += q.eval(codebook.values[code as usize]);
                codes.push(code);
            }
            None => {
                let w = weights[i];
                quant_loss += w.h_par * norm_sq(points.row(i));
                codes.push(0);
            }
        }
    }
    Ok(QuantizedScalars {
        codebook,
        codes,
        quant_loss,
    })
}
