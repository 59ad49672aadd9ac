use rayon::prelude::*;

use super::{converged, farthest_points, init, kmeans, Assignment, ClusterModel, SolverOptions};
use crate::config::InitMode;
use crate::error::Result;
use crate::matrix::{accumulate_outer, dot, norm_sq, Matrix};
use crate::numerics::{dominant_eigenpair, POWER_MAX_ITERS, POWER_TOL};
use crate::rng::{rng_for, stream};

/// Projection of `x` onto the line of `c`: returns `(α, ‖x − αc‖²)`.
#[inline]
fn project(x: &[f64], c: &[f64], cc: f64) -> (f64, f64) {
    if cc == 0.0 {
        return (0.0, norm_sq(x));
    }
    let alpha = dot(x, c) / cc;
    let loss = x
        .iter()
        .zip(c)
        .map(|(xi, ci)| (xi - alpha * ci).powi(2))
        .sum();
    (alpha, loss)
}

/// Assigns each point to the center whose line passes closest, with α the
/// orthogonal projection coefficient. Zero-norm points go to center 0.
pub fn assign_projective(points: &Matrix, centers: &Matrix) -> Assignment {
    let cc: Vec<f64> = centers.iter_rows().map(norm_sq).collect();
    let rows: Vec<(u32, f64, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            if norm_sq(x) == 0.0 {
                return (0, 0.0, 0.0);
            }
            let mut best = (0u32, 0.0, f64::INFINITY);
            for (j, c) in centers.iter_rows().enumerate() {
                let (alpha, loss) = project(x, c, cc[j]);
                if loss < best.2 {
                    best = (j as u32, alpha, loss);
                }
            }
            best
        })
        .collect();
    Assignment::from_rows(rows)
}

/// Top right singular vector of the cluster, canonical sign; `e₁` for an
/// all-zero cluster.
pub fn center_projective(cluster: &Matrix) -> Vec<f64> {
    dominant_eigenpair(&cluster.gram(), POWER_MAX_ITERS, POWER_TOL).1
}

/// `Σ‖x‖² − cᵀGc/‖c‖²` for a cluster with Gram matrix `G`.
fn line_loss(gram: &Matrix, trace: f64, c: &[f64]) -> f64 {
    let cc = norm_sq(c);
    if cc == 0.0 {
        trace
    } else {
        trace - dot(c, &gram.mat_vec(c)) / cc
    }
}

pub(crate) fn initial_centers(points: &Matrix, k: usize, opts: &SolverOptions) -> Result<Matrix> {
    let mut rng = rng_for(opts.seed, &[stream::INIT]);
    match opts.init {
        InitMode::Warm => Ok(kmeans::kmeans_pp(points, k, opts)?.centers),
        InitMode::Seeding => init::kmeans_pp_seeds(points, k, &mut rng),
        InitMode::NormalizedSampling => init::init_normalized_sampling(points, k, &mut rng),
    }
}

/// Alternates projective assignment with top-singular-vector centers.
pub fn projective_k_clustering(
    points: &Matrix,
    k: usize,
    opts: &SolverOptions,
) -> Result<ClusterModel> {
    super::check_k(points.rows(), k)?;
    let centers = initial_centers(points, k, opts)?;
    Ok(projective_from(points, centers, opts))
}

pub(crate) fn projective_from(
    points: &Matrix,
    mut centers: Matrix,
    opts: &SolverOptions,
) -> ClusterModel {
    let k = centers.rows();
    let dim = points.cols();
    let mut current = assign_projective(points, &centers);
    let mut trace = vec![current.loss];
    for _ in 0..opts.max_iters {
        let mut grams = vec![Matrix::zeros(dim, dim); k];
        let mut traces = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (x, &j) in points.iter_rows().zip(&current.assignment) {
            let j = j as usize;
            accumulate_outer(grams[j].as_mut_slice(), x, 1.0);
            traces[j] += norm_sq(x);
            counts[j] += 1;
        }
        let updates: Vec<Option<Vec<f64>>> = (0..k)
            .into_par_iter()
            .map(|j| {
                if counts[j] == 0 {
                    return None;
                }
                let v = dominant_eigenpair(&grams[j], POWER_MAX_ITERS, POWER_TOL).1;
                // Power iteration is approximate; never accept a worse line.
                (line_loss(&grams[j], traces[j], &v)
                    <= line_loss(&grams[j], traces[j], centers.row(j)))
                .then_some(v)
            })
            .collect();
        for (j, v) in updates.into_iter().enumerate() {
            if let Some(v) = v {
                centers.row_mut(j).copy_from_slice(&v);
            }
        }
        let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        for (&j, i) in empty
            .iter()
            .zip(farthest_points(&current.losses, empty.len()))
        {
            centers.row_mut(j).copy_from_slice(points.row(i));
        }
        let prev = current.loss;
        current = assign_projective(points, &centers);
        trace.push(current.loss);
        if converged(prev, current.loss, opts.tol) {
            break;
        }
    }
    // Unit-norm centers make α the signed length of the projection.
    let norms: Vec<f64> = centers.iter_rows().map(|c| norm_sq(c).sqrt()).collect();
    for (j, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            centers.row_mut(j).iter_mut().for_each(|v| *v /= norm);
        }
    }
    for (alpha, &j) in current.alphas.iter_mut().zip(&current.assignment) {
        *alpha *= norms[j as usize];
    }
    current.into_model(centers, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_point_examples() {
        let centers = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let a = assign_projective(&Matrix::from_rows(&[vec![2.0, 2.0]]), &centers);
        assert_eq!((a.assignment[0], a.alphas[0], a.loss), (1, 2.0, 0.0));
        let a = assign_projective(
            &Matrix::from_rows(&[vec![-1.0, 0.0]]),
            &Matrix::from_rows(&[vec![1.0, 0.0]]),
        );
        assert_eq!((a.alphas[0], a.loss), (-1.0, 0.0));
        let a = assign_projective(&Matrix::from_rows(&[vec![0.0, 0.0]]), &centers);
        assert_eq!((a.assignment[0], a.alphas[0], a.loss), (0, 0.0, 0.0));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let centers = Matrix::from_rows(&[vec![1.0, 0.0], vec![-3.0, 0.0]]);
        let a = assign_projective(&Matrix::from_rows(&[vec![2.0, 1.0]]), &centers);
        assert_eq!(a.assignment[0], 0);
    }

    #[test]
    fn center_examples() {
        let v = center_projective(&Matrix::from_rows(&[vec![2.0, 0.0], vec![3.0, 0.0]]));
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        let v = center_projective(&Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]));
        let h = 0.5f64.sqrt();
        assert!((v[0] - h).abs() < 1e-12 && (v[1] - h).abs() < 1e-12);
        assert_eq!(center_projective(&Matrix::zeros(3, 2)), vec![1.0, 0.0]);
    }

    #[test]
    fn two_lines_fit_exactly() {
        let pts = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![-2.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 1.5],
            vec![0.0, -0.5],
            vec![0.0, 4.0],
        ]);
        let m = projective_k_clustering(&pts, 2, &SolverOptions::default()).unwrap();
        assert!(m.loss() < 1e-20, "{}", m.loss());
        for (i, x) in pts.iter_rows().enumerate() {
            let c = m.centers.row(m.assignment[i] as usize);
            assert!((m.alphas[i] * c[0] - x[0]).abs() < 1e-9);
            assert!((m.alphas[i] * c[1] - x[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn centers_have_unit_norm() {
        let pts = Matrix::from_rows(&[
            vec![3.0, 1.0],
            vec![-2.0, 0.5],
            vec![0.2, 4.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        ]);
        let m = projective_k_clustering(&pts, 3, &SolverOptions::default()).unwrap();
        for (i, x) in pts.iter_rows().enumerate() {
            let c = m.centers.row(m.assignment[i] as usize);
            if norm_sq(x) > 0.0 {
                assert!((norm_sq(c) - 1.0).abs() < 1e-12);
                assert!((m.alphas[i] - dot(x, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_equals_n_is_exact() {
        let pts = Matrix::from_rows(&[
            vec![1.0, 2.0],
            vec![-1.0, 0.5],
            vec![0.3, -2.0],
            vec![2.0, 2.1],
        ]);
        for init in [
            InitMode::Warm,
            InitMode::Seeding,
            InitMode::NormalizedSampling,
        ] {
            let m = projective_k_clustering(&pts, 4, &SolverOptions::default().with_init(init))
                .unwrap();
            assert!(m.loss() < 1e-20, "{init:?}: {}", m.loss());
        }
    }
}
