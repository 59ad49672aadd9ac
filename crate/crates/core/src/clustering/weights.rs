use crate::config::ThresholdAngle;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq, Matrix};
use crate::numerics::{aniso_integrals, Quadratic};

/// Weights of the parallel and orthogonal residual components for one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnisoWeights {
    pub h_par: f64,
    pub h_bot: f64,
}

impl AnisoWeights {
    pub const ISOTROPIC: AnisoWeights = AnisoWeights {
        h_par: 1.0,
        h_bot: 1.0,
    };

    pub fn is_zero(&self) -> bool {
        self.h_par == 0.0 && self.h_bot == 0.0
    }
}

/// Residual `x − c` split into the part along `x` and the part orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub r_par: Vec<f64>,
    pub r_bot: Vec<f64>,
}

/// `r∥ = x − (⟨x,c⟩/‖x‖²)x` and `r⊥ = (⟨x,c⟩/‖x‖²)x − c`.
pub fn residual_components(x: &[f64], c: &[f64]) -> Result<ResidualPair> {
    let nx = norm_sq(x);
    if nx == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let p = dot(x, c) / nx;
    Ok(ResidualPair {
        r_par: x.iter().map(|xi| xi - p * xi).collect(),
        r_bot: x.iter().zip(c).map(|(xi, ci)| p * xi - ci).collect(),
    })
}

/// Anisotropic weights for a point of norm `norm_x` under threshold `t`
/// with the default (arccos) angular limit.
pub fn aniso_weights(norm_x: f64, t: f64, dbar: usize) -> Result<AnisoWeights> {
    aniso_weights_with(norm_x, t, dbar, ThresholdAngle::Arccos)
}

/// `h∥ = (d̄−1)∫₀^θ sin^{d̄−2} − sin^{d̄}` and `h⊥ = ∫₀^θ sin^{d̄}`, with
/// θ = `angle.theta_max(t, ‖x‖)`.
pub fn aniso_weights_with(
    norm_x: f64,
    t: f64,
    dbar: usize,
    angle: ThresholdAngle,
) -> Result<AnisoWeights> {
    if !(norm_x > 0.0) {
        return Err(Error::ZeroNorm);
    }
    if dbar < 2 {
        return Err(Error::InvalidConfig(format!(
            "anisotropic weights need d̄ ≥ 2, got {dbar}"
        )));
    }
    let (par, bot) = aniso_integrals(dbar as u32, angle.theta_max(t, norm_x));
    let h_bot = bot;
    // Equal analytically at θ = π/2; keep quadrature rounding from flipping the order.
    let h_par = ((dbar - 1) as f64 * par).max(h_bot);
    Ok(AnisoWeights { h_par, h_bot })
}

/// Weights for every row; zero-norm rows get zero weights.
pub fn point_weights(points: &Matrix, t: f64, angle: ThresholdAngle) -> Result<Vec<AnisoWeights>> {
    let dbar = points.cols();
    points
        .iter_rows()
        .map(|x| {
            let norm = norm_sq(x).sqrt();
            if norm == 0.0 {
                Ok(AnisoWeights::default())
            } else {
                aniso_weights_with(norm, t, dbar, angle)
            }
        })
        .collect()
}

/// The per-point anisotropic loss of `α·c` as a quadratic in α:
/// `w = (h∥−h⊥)⟨x,c⟩²/‖x‖² + h⊥‖c‖²`, `a = −2h∥⟨x,c⟩`, `b = h∥‖x‖²`.
#[inline]
pub fn aniso_quadratic(x: &[f64], norm_sq_x: f64, c: &[f64], w: AnisoWeights) -> Quadratic {
    let g = dot(x, c);
    aniso_quadratic_parts(g, norm_sq_x, norm_sq(c), w)
}

#[inline]
pub(crate) fn aniso_quadratic_parts(
    g: f64,
    norm_sq_x: f64,
    norm_sq_c: f64,
    w: AnisoWeights,
) -> Quadratic {
    if norm_sq_x == 0.0 {
        return Quadratic {
            w: 0.0,
            a: 0.0,
            b: 0.0,
        };
    }
    Quadratic {
        w: (w.h_par - w.h_bot) * g * g / norm_sq_x + w.h_bot * norm_sq_c,
        a: -2.0 * w.h_par * g,
        b: w.h_par * norm_sq_x,
    }
}

/// Scaling α minimizing the anisotropic loss of `α·c` for point `x`:
/// `h∥⟨x,c⟩ / ((h∥−h⊥)⟨x,c⟩²/‖x‖² + h⊥‖c‖²)`, or 0 when the denominator
/// is at most 1e-30.
pub fn opt_alpha_aniso(x: &[f64], c: &[f64], w: AnisoWeights) -> f64 {
    let q = aniso_quadratic(x, norm_sq(x), c, w);
    alpha_from_quadratic(&q)
}

#[inline]
pub(crate) fn alpha_from_quadratic(q: &Quadratic) -> f64 {
    if q.w <= 1e-30 {
        0.0
    } else {
        q.vertex()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn residual_examples() {
        let r = residual_components(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!((r.r_par, r.r_bot), (vec![0.0, 0.0], vec![0.0, 0.0]));
        let r = residual_components(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(r.r_par, vec![1.0, 0.0]);
        assert_eq!(r.r_bot, vec![0.0, -1.0]);
        assert!(matches!(
            residual_components(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn residual_parts_sum_and_are_orthogonal() {
        let mut rng = rng_for(1, &[]);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r = residual_components(&x, &c).unwrap();
            for i in 0..4 {
                assert!((r.r_par[i] + r.r_bot[i] - (x[i] - c[i])).abs() < 1e-12);
            }
            let scale = norm_sq(&x).sqrt() * norm_sq(&c).sqrt();
            assert!(dot(&r.r_par, &r.r_bot).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn quadratic_matches_residual_definition() {
        let mut rng = rng_for(2, &[]);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w = AnisoWeights {
                h_par: rng.gen_range(0.5..2.0),
                h_bot: rng.gen_range(0.0..0.5),
            };
            let alpha = rng.gen_range(-3.0..3.0);
            let ac: Vec<f64> = c.iter().map(|v| alpha * v).collect();
            let r = residual_components(&x, &ac).unwrap();
            let direct = w.h_par * norm_sq(&r.r_par) + w.h_bot * norm_sq(&r.r_bot);
            let q = aniso_quadratic(&x, norm_sq(&x), &c, w);
            assert!((q.eval(alpha) - direct).abs() < 1e-10 * (1.0 + direct));
        }
    }

    #[test]
    fn zero_threshold_weights() {
        use crate::config::ThresholdAngle;
        let w = aniso_weights_with(1.0, 0.0, 4, ThresholdAngle::Ratio).unwrap();
        assert_eq!((w.h_par, w.h_bot), (0.0, 0.0));
        // Under the arccos limit t = 0 integrates to π/2, where the weights coincide.
        let w = aniso_weights(1.0, 0.0, 4).unwrap();
        assert!((w.h_par - w.h_bot).abs() < 1e-12 && w.h_bot > 0.0);
        assert!(aniso_weights(0.0, 0.2, 4).is_err());
        assert!(aniso_weights(1.0, 0.2, 1).is_err());
    }

    #[test]
    fn alpha_special_cases() {
        let x = [1.0, 2.0, -1.0];
        let c = [0.5, 0.1, 2.0];
        let iso = opt_alpha_aniso(&x, &c, AnisoWeights::ISOTROPIC);
        assert!((iso - dot(&x, &c) / norm_sq(&c)).abs() < 1e-12);
        let w = AnisoWeights {
            h_par: 2.0,
            h_bot: 0.3,
        };
        assert!((opt_alpha_aniso(&x, &x, w) - 1.0).abs() < 1e-12);
        assert_eq!(opt_alpha_aniso(&x, &c, AnisoWeights::default()), 0.0);
    }
}
