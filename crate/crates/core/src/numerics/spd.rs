use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ridge used when the caller has no better choice: 1e-9 · trace(A) / dim.
pub fn default_ridge(a: &Matrix) -> f64 {
    let dim = a.cols();
    let trace: f64 = (0..dim).map(|i| a.row(i)[i]).sum();
    1e-9 * trace.abs() / dim as f64
}

/// Solves `(A + ridge·I) x = b` for symmetric `A` by Cholesky factorization.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot is not strictly
/// positive, which the solvers treat as a degenerate cluster.
pub fn solve_spd(a: &Matrix, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let n = a.cols();
    if a.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.rows(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    // Lower-triangular factor, row-major.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.row(i)[j];
            if i == j {
                sum += ridge;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    /// Gaussian elimination with partial pivoting.
    fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i * n + i];
        }
        x
    }

    #[test]
    fn identity_and_diagonal() {
        let id = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(solve_spd(&id, &[3.0, -1.0], 0.0).unwrap(), vec![3.0, -1.0]);
        let diag = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 2.0]]);
        let x = solve_spd(&diag, &[8.0, 2.0], 0.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_matches_lu() {
        let mut rng = rng_for(5, &[]);
        for _ in 0..100 {
            let n = 5;
            let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>()
                        + if i == j { 0.5 } else { 0.0 };
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = solve_spd(&Matrix::from_vec(n, n, a.clone()), &b, 0.0).unwrap();
            let reference = lu_solve(a.clone(), b.clone(), n);
            for (p, q) in x.iter().zip(&reference) {
                assert!((p - q).abs() < 1e-9, "{p} vs {q}");
            }
            let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let resid: f64 = (0..n)
                .map(|i| ((0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>() - b[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-8 * bnorm);
        }
    }

    #[test]
    fn ridge_rescues_singular_and_failure_is_reported() {
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(
            solve_spd(&singular, &[1.0, 1.0], 0.0),
            Err(Error::NotPositiveDefinite)
        ));
        let x = solve_spd(&singular, &[1.0, 1.0], 1e-6).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
        let zero = Matrix::zeros(2, 2);
        assert!(solve_spd(&zero, &[1.0, 0.0], default_ridge(&zero)).is_err());
    }
}
