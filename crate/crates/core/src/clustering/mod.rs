//! Section-level clustering solvers.
//!
//! Four solvers share one shape: start from initial centers, then alternate
//! an assignment step and a center step, recording the loss once per
//! iteration. Every step is an exact or guarded minimization for the other
//! half held fixed, so each `loss_trace` is non-increasing.
//!
//! | solver                           | center        | per-point scalar |
//! |----------------------------------|---------------|------------------|
//! | [`kmeans_pp`]                    | mean          | 1                |
//! | [`anisotropic_k_clustering`]     | weighted solve| 1                |
//! | [`projective_k_clustering`]      | top singular  | projection       |
//! | [`aniso_projective_k_clustering`]| weighted solve| optimal scaling  |

mod anisotropic;
mod init;
mod kmeans;
mod projective;
mod weights;

pub use anisotropic::{
    aniso_projective_k_clustering, anisotropic_k_clustering, assign_anisotropic,
    assign_anisotropic_euclidean, center_anisotropic, cluster_aniso_loss,
};
pub use init::{init_normalized_sampling, kmeans_pp_seeds};
pub use kmeans::{assign_nearest, kmeans_pp};
pub use projective::{assign_projective, center_projective, projective_k_clustering};
pub use weights::{
    aniso_quadratic, aniso_weights, aniso_weights_with, opt_alpha_aniso, point_weights,
    residual_components, AnisoWeights, ResidualPair,
};

use serde::{Deserialize, Serialize};

use crate::config::InitMode;
use crate::matrix::Matrix;

/// Result of fitting one section.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// `k × d̄` centers.
    pub centers: Matrix,
    pub assignment: Vec<u32>,
    pub alphas: Vec<f64>,
    pub loss_trace: Vec<f64>,
    /// Set when every anisotropic weight vanished and nothing was fitted.
    pub degenerate: bool,
}

impl ClusterModel {
    pub fn loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(0.0)
    }

    pub fn k(&self) -> usize {
        self.centers.rows()
    }
}

/// Output of an assignment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub assignment: Vec<u32>,
    pub alphas: Vec<f64>,
    /// Per-point loss contributions.
    pub losses: Vec<f64>,
    pub loss: f64,
}

impl Assignment {
    fn from_rows(rows: Vec<(u32, f64, f64)>) -> Self {
        let mut assignment = Vec::with_capacity(rows.len());
        let mut alphas = Vec::with_capacity(rows.len());
        let mut losses = Vec::with_capacity(rows.len());
        for (j, a, l) in rows {
            assignment.push(j);
            alphas.push(a);
            losses.push(l);
        }
        // Sequential sum keeps the total independent of thread scheduling.
        let loss = losses.iter().sum();
        Self {
            assignment,
            alphas,
            losses,
            loss,
        }
    }

    fn into_model(self, centers: Matrix, loss_trace: Vec<f64>) -> ClusterModel {
        ClusterModel {
            centers,
            assignment: self.assignment,
            alphas: self.alphas,
            loss_trace,
            degenerate: false,
        }
    }
}

/// How the anisotropic projective assignment step chooses a center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignRule {
    /// Minimize the anisotropic loss at each center's optimal scaling.
    #[default]
    AnisotropicLoss,
    /// Minimize ‖x − βc‖₂ at the optimal scaling β; inside the solver a move
    /// is kept only when it does not raise the point's anisotropic loss.
    Euclidean,
}

/// Iteration controls shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: InitMode,
    pub rule: AssignRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-6,
            seed: 0,
            init: InitMode::Warm,
            rule: AssignRule::AnisotropicLoss,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }
}

/// True once the loss moved by less than `tol` relative, or hit zero.
fn converged(prev: f64, next: f64, tol: f64) -> bool {
    prev <= 0.0 || (prev - next) <= tol * prev
}

/// Picks distinct points with the largest current loss, one per empty
/// cluster, highest loss first and lowest index on ties.
fn farthest_points(losses: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order.truncate(count);
    order
}

fn check_k(n: usize, k: usize) -> crate::Result<()> {
    if k == 0 {
        return Err(crate::Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(crate::Error::InvalidConfig(format!(
            "k = {k} exceeds the {n} points available"
        )));
    }
    Ok(())
}
