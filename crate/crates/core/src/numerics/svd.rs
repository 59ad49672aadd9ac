use rand::Rng as _;

use crate::matrix::{dot, Matrix};
use crate::rng::{rng_for, stream};

pub const POWER_MAX_ITERS: usize = 500;
pub const POWER_TOL: f64 = 1e-10;

/// Top singular value with its left and right singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriple {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Flips `v` so its largest-magnitude entry (first on ties) is non-negative.
fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn square_normalized(m: &Matrix) -> Matrix {
    let n = m.cols();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| m.row(i)[k] * m.row(k)[j]).sum();
        }
    }
    let scale = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale > 0.0 {
        out.iter_mut().for_each(|v| *v /= scale);
    }
    Matrix::from_vec(n, n, out)
}

/// Largest eigenvalue and unit eigenvector of a symmetric PSD matrix by
/// power iteration from a fixed-seed start vector.
///
/// Iterates on G⁸ (three normalized squarings) so the eigen-gap is raised to
/// the eighth power; stops once the Rayleigh quotient of G moves by less
/// than `tol` relative and the vector has settled.
pub fn dominant_eigenpair(gram: &Matrix, max_iters: usize, tol: f64) -> (f64, Vec<f64>) {
    let dim = gram.cols();
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    if gram.as_slice().iter().all(|&x| x == 0.0) {
        return (0.0, e1);
    }
    let boosted = square_normalized(&square_normalized(&square_normalized(gram)));
    let mut rng = rng_for(0, &[stream::POWER]);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);

    let mut rayleigh = f64::NEG_INFINITY;
    for _ in 0..max_iters.max(1) {
        let mut w = boosted.mat_vec(&v);
        if normalize(&mut w) == 0.0 {
            // Start landed in the null space; restart from the heaviest axis.
            let heaviest = (0..dim)
                .max_by(|&a, &b| gram.row(a)[a].total_cmp(&gram.row(b)[b]))
                .unwrap_or(0);
            v = vec![0.0; dim];
            v[heaviest] = 1.0;
            continue;
        }
        let moved = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        v = w;
        let next = dot(&v, &gram.mat_vec(&v));
        let done = (next - rayleigh).abs() <= tol * next.abs() && moved <= tol.sqrt() * 1e-3;
        rayleigh = next;
        if done {
            break;
        }
    }
    let lambda = dot(&v, &gram.mat_vec(&v)).max(0.0);
    canonicalize_sign(&mut v);
    (lambda, v)
}

/// Top singular triple of `a` via power iteration on AᵀA.
///
/// An all-zero matrix yields `sigma = 0`, `v = e₁` and `u = 0`.
pub fn top_singular_pair(a: &Matrix, max_iters: usize, tol: f64) -> SingularTriple {
    let (_, v) = dominant_eigenpair(&a.gram(), max_iters, tol);
    let av = a.mat_vec(&v);
    let sigma = dot(&av, &av).sqrt();
    let u = if sigma > 0.0 {
        av.iter().map(|x| x / sigma).collect()
    } else {
        vec![0.0; a.rows()]
    };
    SingularTriple { sigma, u, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    /// Cyclic Jacobi eigenvalues of a symmetric matrix, used as an
    /// independent reference.
    fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).collect()
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]]);
        let t = top_singular_pair(&a, POWER_MAX_ITERS, POWER_TOL);
        assert!((t.sigma - 4.0).abs() < 1e-9);
        assert!((t.v[0]).abs() < 1e-6 && (t.v[1] - 1.0).abs() < 1e-9);
        assert!((t.u[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rank_one_matrix() {
        let (a, b) = ([1.0, 2.0], [0.6, 0.8]);
        let m = Matrix::from_rows(&[
            vec![a[0] * b[0], a[0] * b[1]],
            vec![a[1] * b[0], a[1] * b[1]],
        ]);
        let t = top_singular_pair(&m, POWER_MAX_ITERS, POWER_TOL);
        assert!((t.sigma - 5f64.sqrt()).abs() < 1e-9);
        assert!((t.v[0] - 0.6).abs() < 1e-9 && (t.v[1] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix() {
        let t = top_singular_pair(&Matrix::zeros(3, 2), 10, 1e-10);
        assert_eq!(t.sigma, 0.0);
        assert_eq!(t.v, vec![1.0, 0.0]);
        assert_eq!(t.u, vec![0.0; 3]);
    }

    #[test]
    fn matches_jacobi_reference_on_random_matrices() {
        let mut rng = rng_for(11, &[]);
        for _ in 0..50 {
            let data: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = Matrix::from_vec(8, 3, data);
            let reference = jacobi_eigenvalues(a.gram().as_slice().to_vec(), 3)
                .into_iter()
                .fold(0.0f64, f64::max)
                .sqrt();
            let t = top_singular_pair(&a, POWER_MAX_ITERS, POWER_TOL);
            assert!(
                (t.sigma - reference).abs() <= 1e-7 * reference,
                "{} vs {reference}",
                t.sigma
            );
            assert!((dot(&t.v, &t.v) - 1.0).abs() < 1e-9);
            let (imax, _) = t.v.iter().enumerate().fold((0, 0.0f64), |acc, (i, x)| {
                if x.abs() > acc.1 {
                    (i, x.abs())
                } else {
                    acc
                }
            });
            assert!(t.v[imax] >= 0.0);
            // σ dominates ‖Av'‖ for random unit v'.
            for _ in 0..100 {
                let mut w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                normalize(&mut w);
                let aw = a.mat_vec(&w);
                assert!(dot(&aw, &aw).sqrt() <= t.sigma * (1.0 + 1e-9));
            }
        }
    }
}
