use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::{dist_sq, norm_sq, Matrix};
use crate::rng::Rng;

/// Draws an index with probability proportional to `weights`, or uniformly
/// when every weight is zero.
fn draw(weights: &[f64], rng: &mut Rng) -> usize {
    match WeightedIndex::new(weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.gen_range(0..weights.len()),
    }
}

/// k-means++ seeding: first center uniform, each further center drawn with
/// probability proportional to the squared distance to the nearest seed.
pub fn kmeans_pp_seeds(points: &Matrix, k: usize, rng: &mut Rng) -> Result<Matrix> {
    let n = points.rows();
    super::check_k(n, k)?;
    let mut centers = Matrix::zeros(k, points.cols());
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = points
        .iter_rows()
        .map(|x| dist_sq(x, points.row(first)))
        .collect();
    for j in 1..k {
        let pick = draw(&nearest, rng);
        centers.row_mut(j).copy_from_slice(points.row(pick));
        for (i, x) in points.iter_rows().enumerate() {
            nearest[i] = nearest[i].min(dist_sq(x, centers.row(j)));
        }
    }
    Ok(centers)
}

/// Sign-aware D² sampling over unit-normalized points.
///
/// A point's weight is `min_s min(‖x−s‖², ‖x+s‖²)` over the seeds drawn so
/// far, so a point on the line of an existing seed is never drawn while any
/// other point has positive weight. Zero-norm points are skipped.
pub fn init_normalized_sampling(points: &Matrix, k: usize, rng: &mut Rng) -> Result<Matrix> {
    let units: Vec<Vec<f64>> = points
        .iter_rows()
        .filter_map(|x| {
            let norm = norm_sq(x).sqrt();
            (norm > 0.0).then(|| x.iter().map(|v| v / norm).collect())
        })
        .collect();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if units.len() < k {
        return Err(Error::InvalidData(format!(
            "normalized sampling needs {k} nonzero points, found {}",
            units.len()
        )));
    }
    let mut centers = Matrix::zeros(k, points.cols());
    let mut weights = vec![f64::INFINITY; units.len()];
    for j in 0..k {
        let pick = if j == 0 {
            rng.gen_range(0..units.len())
        } else {
            draw(&weights, rng)
        };
        centers.row_mut(j).copy_from_slice(&units[pick]);
        let seed = centers.row(j).to_vec();
        for (w, u) in weights.iter_mut().zip(&units) {
            let plus: f64 = u.iter().zip(&seed).map(|(a, b)| (a + b).powi(2)).sum();
            *w = w.min(dist_sq(u, &seed)).min(plus);
        }
    }
    Ok(centers)
}
