use rayon::prelude::*;

use super::weights::AnisoWeights;
use super::{
    converged, farthest_points, projective, AssignRule, Assignment, ClusterModel, SolverOptions,
};
use crate::config::InitMode;
use crate::error::{Error, Result};
use crate::matrix::{accumulate_outer, dot, norm_sq, Matrix};
use crate::numerics::{default_ridge, solve_spd};

/// Per-point anisotropic loss of `α·c`, evaluated from the residual parts so
/// that `c = x, α = 1` gives exactly zero.
#[derive(Clone, Copy)]
struct PointFit {
    /// `⟨x,c⟩/‖x‖²`
    p: f64,
    xx: f64,
    /// `‖r⊥(x, c)‖² = ‖px − c‖²`
    e: f64,
    w: AnisoWeights,
}

impl PointFit {
    #[inline]
    fn new(x: &[f64], xx: f64, c: &[f64], w: AnisoWeights) -> Self {
        let p = dot(x, c) / xx;
        let e = x.iter().zip(c).map(|(xi, ci)| (p * xi - ci).powi(2)).sum();
        Self { p, xx, e, w }
    }

    #[inline]
    fn loss(&self, alpha: f64) -> f64 {
        self.w.h_par * (1.0 - alpha * self.p).powi(2) * self.xx
            + self.w.h_bot * alpha * alpha * self.e
    }

    #[inline]
    fn best_alpha(&self) -> f64 {
        let denom = self.w.h_par * self.p * self.p * self.xx + self.w.h_bot * self.e;
        if denom <= 1e-30 {
            0.0
        } else {
            self.w.h_par * self.p * self.xx / denom
        }
    }
}

/// Points the anisotropic loss ignores: zero norm or both weights zero.
#[inline]
fn inert(xx: f64, w: AnisoWeights) -> bool {
    xx == 0.0 || w.is_zero()
}

/// Anisotropic assignment.
///
/// With `allow_scaling` each center is tried at its optimal scaling and the
/// point takes the pair with the smallest anisotropic loss. Without it α = 1
/// and the point takes the center with the smallest α = 1 loss. Points with
/// zero norm or zero weights go to center 0 with zero loss.
pub fn assign_anisotropic(
    points: &Matrix,
    centers: &Matrix,
    weights: &[AnisoWeights],
    allow_scaling: bool,
) -> Assignment {
    let rows: Vec<(u32, f64, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let xx = norm_sq(x);
            if inert(xx, weights[i]) {
                return (0, if allow_scaling { 0.0 } else { 1.0 }, 0.0);
            }
            let mut best = (0u32, 0.0, f64::INFINITY);
            for (j, c) in centers.iter_rows().enumerate() {
                let fit = PointFit::new(x, xx, c, weights[i]);
                let alpha = if allow_scaling { fit.best_alpha() } else { 1.0 };
                let loss = fit.loss(alpha);
                if loss < best.2 {
                    best = (j as u32, alpha, loss);
                }
            }
            best
        })
        .collect();
    Assignment::from_rows(rows)
}

/// Assignment by Euclidean distance `‖x − βⱼcⱼ‖₂` at each center's optimal
/// anisotropic scaling βⱼ. Reported losses are still anisotropic.
pub fn assign_anisotropic_euclidean(
    points: &Matrix,
    centers: &Matrix,
    weights: &[AnisoWeights],
) -> Assignment {
    let rows: Vec<(u32, f64, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let xx = norm_sq(x);
            if inert(xx, weights[i]) {
                return (0, 0.0, 0.0);
            }
            let mut best = (0u32, 0.0, 0.0, f64::INFINITY);
            for (j, c) in centers.iter_rows().enumerate() {
                let fit = PointFit::new(x, xx, c, weights[i]);
                let beta = fit.best_alpha();
                let dist: f64 = x
                    .iter()
                    .zip(c)
                    .map(|(xi, ci)| (xi - beta * ci).powi(2))
                    .sum();
                if dist < best.3 {
                    best = (j as u32, beta, fit.loss(beta), dist);
                }
            }
            (best.0, best.1, best.2)
        })
        .collect();
    Assignment::from_rows(rows)
}

fn center_from(
    points: &Matrix,
    members: &[usize],
    alphas: &[f64],
    weights: &[AnisoWeights],
) -> Result<Vec<f64>> {
    let dim = points.cols();
    let mut m = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for &i in members {
        let x = points.row(i);
        let xx = norm_sq(x);
        let (a, w) = (alphas[i], weights[i]);
        if inert(xx, w) || a == 0.0 {
            continue;
        }
        let a2 = a * a;
        accumulate_outer(m.as_mut_slice(), x, a2 * (w.h_par - w.h_bot) / xx);
        for d in 0..dim {
            m.row_mut(d)[d] += a2 * w.h_bot;
            rhs[d] += a * w.h_par * x[d];
        }
    }
    if m.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    solve_spd(&m, &rhs, 0.0).or_else(|_| solve_spd(&m, &rhs, default_ridge(&m)))
}

/// Center minimizing the cluster's anisotropic loss with the scalings held
/// fixed: `c* = (Σ α²((h∥−h⊥)xxᵀ/‖x‖² + h⊥I))⁻¹ Σ α h∥ x`.
pub fn center_anisotropic(
    cluster: &Matrix,
    alphas: &[f64],
    weights: &[AnisoWeights],
) -> Result<Vec<f64>> {
    if cluster.rows() == 0 {
        return Err(Error::EmptyInput("cluster"));
    }
    if alphas.len() != cluster.rows() || weights.len() != cluster.rows() {
        return Err(Error::DimensionMismatch {
            expected: cluster.rows(),
            found: alphas.len().min(weights.len()),
        });
    }
    let members: Vec<usize> = (0..cluster.rows()).collect();
    center_from(cluster, &members, alphas, weights)
}

/// Anisotropic loss of the listed points against one center at fixed scalings.
pub fn cluster_aniso_loss(
    points: &Matrix,
    members: &[usize],
    alphas: &[f64],
    weights: &[AnisoWeights],
    c: &[f64],
) -> f64 {
    members
        .iter()
        .map(|&i| {
            let x = points.row(i);
            let xx = norm_sq(x);
            if inert(xx, weights[i]) {
                0.0
            } else {
                PointFit::new(x, xx, c, weights[i]).loss(alphas[i])
            }
        })
        .sum()
}

fn members_of(assignment: &[u32], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &j) in assignment.iter().enumerate() {
        members[j as usize].push(i);
    }
    members
}

/// Guarded center step: a cluster keeps its old center unless the solve
/// succeeds and does not raise the cluster's loss at the current scalings.
fn update_centers(
    points: &Matrix,
    centers: &mut Matrix,
    members: &[Vec<usize>],
    alphas: &[f64],
    weights: &[AnisoWeights],
) {
    let updates: Vec<Option<Vec<f64>>> = members
        .par_iter()
        .enumerate()
        .map(|(j, idx)| {
            if idx.is_empty() {
                return None;
            }
            let c = center_from(points, idx, alphas, weights).ok()?;
            let old = cluster_aniso_loss(points, idx, alphas, weights, centers.row(j));
            (cluster_aniso_loss(points, idx, alphas, weights, &c) <= old).then_some(c)
        })
        .collect();
    for (j, c) in updates.into_iter().enumerate() {
        if let Some(c) = c {
            centers.row_mut(j).copy_from_slice(&c);
        }
    }
}

fn reseed_empty(points: &Matrix, centers: &mut Matrix, members: &[Vec<usize>], losses: &[f64]) {
    let empty: Vec<usize> = (0..members.len())
        .filter(|&j| members[j].is_empty())
        .collect();
    for (&j, i) in empty.iter().zip(farthest_points(losses, empty.len())) {
        centers.row_mut(j).copy_from_slice(points.row(i));
    }
}

fn check_weights(points: &Matrix, weights: &[AnisoWeights]) -> Result<()> {
    if weights.len() != points.rows() {
        return Err(Error::DimensionMismatch {
            expected: points.rows(),
            found: weights.len(),
        });
    }
    Ok(())
}

fn degenerate(
    points: &Matrix,
    centers: Matrix,
    weights: &[AnisoWeights],
    allow_scaling: bool,
) -> ClusterModel {
    let a = assign_anisotropic(points, &centers, weights, allow_scaling);
    let mut model = a.into_model(centers, vec![0.0]);
    model.degenerate = true;
    model
}

/// Anisotropic k-clustering with α ≡ 1.
pub fn anisotropic_k_clustering(
    points: &Matrix,
    k: usize,
    weights: &[AnisoWeights],
    opts: &SolverOptions,
) -> Result<ClusterModel> {
    super::check_k(points.rows(), k)?;
    check_weights(points, weights)?;
    let centers = projective::initial_centers(points, k, opts)?;
    if weights.iter().all(AnisoWeights::is_zero) {
        return Ok(degenerate(points, centers, weights, false));
    }
    Ok(anisotropic_from(points, centers, weights, opts))
}

fn anisotropic_from(
    points: &Matrix,
    mut centers: Matrix,
    weights: &[AnisoWeights],
    opts: &SolverOptions,
) -> ClusterModel {
    let k = centers.rows();
    let ones = vec![1.0; points.rows()];
    let mut current = assign_anisotropic(points, &centers, weights, false);
    let mut trace = vec![current.loss];
    for _ in 0..opts.max_iters {
        let members = members_of(&current.assignment, k);
        update_centers(points, &mut centers, &members, &ones, weights);
        reseed_empty(points, &mut centers, &members, &current.losses);
        let prev = current.loss;
        current = assign_anisotropic(points, &centers, weights, false);
        trace.push(current.loss);
        if converged(prev, current.loss, opts.tol) {
            break;
        }
    }
    current.into_model(centers, trace)
}

/// Anisotropic projective clustering: per-point optimal scalings, centers
/// solved with the scalings fixed, scalings refreshed after every center step.
pub fn aniso_projective_k_clustering(
    points: &Matrix,
    k: usize,
    weights: &[AnisoWeights],
    opts: &SolverOptions,
) -> Result<ClusterModel> {
    super::check_k(points.rows(), k)?;
    check_weights(points, weights)?;
    let centers = match opts.init {
        InitMode::Warm => {
            if weights.iter().all(AnisoWeights::is_zero) {
                projective::initial_centers(points, k, opts)?
            } else {
                anisotropic_k_clustering(points, k, weights, opts)?.centers
            }
        }
        _ => projective::initial_centers(points, k, opts)?,
    };
    if weights.iter().all(AnisoWeights::is_zero) {
        return Ok(degenerate(points, centers, weights, true));
    }
    Ok(aniso_projective_from(points, centers, weights, opts))
}

fn assign_scaled(
    points: &Matrix,
    centers: &Matrix,
    weights: &[AnisoWeights],
    rule: AssignRule,
) -> Assignment {
    match rule {
        AssignRule::AnisotropicLoss => assign_anisotropic(points, centers, weights, true),
        AssignRule::Euclidean => assign_anisotropic_euclidean(points, centers, weights),
    }
}

/// Each point's refreshed optimal scaling against its own center.
fn refresh(
    points: &Matrix,
    centers: &Matrix,
    assignment: &[u32],
    weights: &[AnisoWeights],
) -> Assignment {
    let rows: Vec<(u32, f64, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let j = assignment[i];
            let x = points.row(i);
            let xx = norm_sq(x);
            if inert(xx, weights[i]) {
                return (j, 0.0, 0.0);
            }
            let fit = PointFit::new(x, xx, centers.row(j as usize), weights[i]);
            let alpha = fit.best_alpha();
            (j, alpha, fit.loss(alpha))
        })
        .collect();
    Assignment::from_rows(rows)
}

fn aniso_projective_from(
    points: &Matrix,
    mut centers: Matrix,
    weights: &[AnisoWeights],
    opts: &SolverOptions,
) -> ClusterModel {
    let k = centers.rows();
    let mut current = assign_scaled(points, &centers, weights, opts.rule);
    let mut trace = vec![current.loss];
    for _ in 0..opts.max_iters {
        let members = members_of(&current.assignment, k);
        update_centers(points, &mut centers, &members, &current.alphas, weights);
        let refreshed = refresh(points, &centers, &current.assignment, weights);
        reseed_empty(points, &mut centers, &members, &refreshed.losses);
        let mut next = assign_scaled(points, &centers, weights, opts.rule);
        if opts.rule == AssignRule::Euclidean {
            // The distance rule may pick a pair with a larger loss; keep the
            // refreshed pair in that case.
            let rows = (0..points.rows())
                .map(|i| {
                    if next.losses[i] <= refreshed.losses[i] {
                        (next.assignment[i], next.alphas[i], next.losses[i])
                    } else {
                        (
                            refreshed.assignment[i],
                            refreshed.alphas[i],
                            refreshed.losses[i],
                        )
                    }
                })
                .collect();
            next = Assignment::from_rows(rows);
        }
        let prev = current.loss;
        current = next;
        trace.push(current.loss);
        if converged(prev, current.loss, opts.tol) {
            break;
        }
    }
    current.into_model(centers, trace)
}
