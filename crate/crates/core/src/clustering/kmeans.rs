use rayon::prelude::*;

use super::{
    converged, farthest_points, init::kmeans_pp_seeds, Assignment, ClusterModel, SolverOptions,
};
use crate::error::Result;
use crate::matrix::{dist_sq, Matrix};
use crate::rng::{rng_for, stream};

/// Nearest center under squared Euclidean distance, lowest index on ties.
pub fn assign_nearest(points: &Matrix, centers: &Matrix) -> Assignment {
    let rows: Vec<(u32, f64, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let mut best = (0u32, f64::INFINITY);
            for (j, c) in centers.iter_rows().enumerate() {
                let d = dist_sq(x, c);
                if d < best.1 {
                    best = (j as u32, d);
                }
            }
            (best.0, 1.0, best.1)
        })
        .collect();
    Assignment::from_rows(rows)
}

fn cluster_means(points: &Matrix, assignment: &[u32], centers: &mut Matrix) -> Vec<usize> {
    let dim = points.cols();
    let mut sums = Matrix::zeros(centers.rows(), dim);
    let mut counts = vec![0usize; centers.rows()];
    for (x, &j) in points.iter_rows().zip(assignment) {
        counts[j as usize] += 1;
        sums.row_mut(j as usize)
            .iter_mut()
            .zip(x)
            .for_each(|(s, v)| *s += v);
    }
    for (j, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            let mean: Vec<f64> = sums.row(j).iter().map(|s| s * inv).collect();
            centers.row_mut(j).copy_from_slice(&mean);
        }
    }
    counts
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_pp(points: &Matrix, k: usize, opts: &SolverOptions) -> Result<ClusterModel> {
    let mut rng = rng_for(opts.seed, &[stream::INIT]);
    let centers = kmeans_pp_seeds(points, k, &mut rng)?;
    Ok(lloyd(points, centers, opts))
}

pub(crate) fn lloyd(points: &Matrix, mut centers: Matrix, opts: &SolverOptions) -> ClusterModel {
    let mut current = assign_nearest(points, &centers);
    let mut trace = vec![current.loss];
    for _ in 0..opts.max_iters {
        let counts = cluster_means(points, &current.assignment, &mut centers);
        let empty: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] == 0).collect();
        for (&j, i) in empty
            .iter()
            .zip(farthest_points(&current.losses, empty.len()))
        {
            centers.row_mut(j).copy_from_slice(points.row(i));
        }
        let next = assign_nearest(points, &centers);
        let prev = current.loss;
        current = next;
        trace.push(current.loss);
        if converged(prev, current.loss, opts.tol) {
            break;
        }
    }
    current.into_model(centers, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_zero_vector() {
        let pts = Matrix::zeros(5, 3);
        let m = kmeans_pp(&pts, 2, &SolverOptions::default()).unwrap();
        assert_eq!(m.loss(), 0.0);
        assert!(m.assignment.iter().all(|&j| j == 0));
        assert!(m.alphas.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn separated_blobs_give_blob_means() {
        let pts = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.2, 0.0],
            vec![0.0, 0.2],
            vec![10.0, 10.0],
            vec![10.2, 10.0],
            vec![10.0, 10.2],
        ]);
        for seed in 0..5 {
            let m = kmeans_pp(&pts, 2, &SolverOptions::default().with_seed(seed)).unwrap();
            let mut cs: Vec<Vec<f64>> = m.centers.iter_rows().map(|r| r.to_vec()).collect();
            cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want = [[0.2 / 3.0, 0.2 / 3.0], [10.0 + 0.2 / 3.0, 10.0 + 0.2 / 3.0]];
            for (c, w) in cs.iter().zip(want) {
                assert!(dist_sq(c, &w) < 1e-20);
            }
        }
    }

    #[test]
    fn trace_is_monotone() {
        use crate::rng::rng_for;
        use rand::Rng;
        let mut rng = rng_for(4, &[]);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = kmeans_pp(&Matrix::from_rows(&rows), 7, &SolverOptions::default()).unwrap();
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
        }
    }
}
