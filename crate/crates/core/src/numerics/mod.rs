//! Numeric kernels shared by the solvers.

mod quadrature;
mod scalar1d;
mod spd;
mod svd;

pub use quadrature::{aniso_integrals, sin_power_integral, SIMPSON_PANELS};
pub use scalar1d::{
    alternating_minimization, kmeans_1d, minimize_quadratic_scalars, Quadratic, ScalarCodebook,
};
pub use spd::{default_ridge, solve_spd};
pub use svd::{dominant_eigenpair, top_singular_pair, SingularTriple, POWER_MAX_ITERS, POWER_TOL};
