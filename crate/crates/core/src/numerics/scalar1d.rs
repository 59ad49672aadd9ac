//! Scalar codebooks on the real line.
//!
//! Both routes minimize `Σᵢ min_l wᵢλ_l² + aᵢλ_l + bᵢ` with `wᵢ > 0`. Each
//! term equals `wᵢ(λ_l − mᵢ)² + const` with vertex `mᵢ = −aᵢ/2wᵢ`, so for a
//! fixed codebook every point picks the code nearest its vertex and the
//! groups are contiguous runs of the vertices in sorted order. Group sums of
//! `w`, `a`, `b` over those runs come from prefix sums, which makes each
//! alternating round `O(s log n)`. Plain 1-D k-means is the case
//! `w = 1, a = −2v, b = v²`.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream, Rng};

const MAX_ROUNDS: usize = 100;

/// One per-point quadratic `w·λ² + a·λ + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub w: f64,
    pub a: f64,
    pub b: f64,
}

impl Quadratic {
    pub fn eval(&self, lambda: f64) -> f64 {
        (self.w * lambda + self.a) * lambda + self.b
    }

    pub fn vertex(&self) -> f64 {
        -self.a / (2.0 * self.w)
    }

    /// Minimum over all real λ.
    pub fn min_value(&self) -> f64 {
        self.b - self.a * self.a / (4.0 * self.w)
    }
}

/// A set of scalar codes and the assignment of inputs to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCodebook {
    /// Strictly increasing code values.
    pub values: Vec<f64>,
    pub assignment: Vec<u32>,
    /// Final objective, recomputed directly from the inputs.
    pub objective: f64,
    /// Objective after every alternating round of the winning restart.
    pub trace: Vec<f64>,
}

impl ScalarCodebook {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn code_value(&self, i: usize) -> f64 {
        self.values[self.assignment[i] as usize]
    }
}

/// Sorted view of the vertices with prefix sums.
struct Line {
    keys: Vec<f64>,
    /// Distinct keys, ascending.
    distinct: Vec<f64>,
    weights: Vec<f64>,
    prefix_w: Vec<f64>,
    prefix_a: Vec<f64>,
    prefix_b: Vec<f64>,
}

impl Line {
    fn new(coeffs: &[Quadratic]) -> Self {
        let mut order: Vec<usize> = (0..coeffs.len()).collect();
        order.sort_by(|&i, &j| {
            coeffs[i]
                .vertex()
                .total_cmp(&coeffs[j].vertex())
                .then(i.cmp(&j))
        });
        let keys: Vec<f64> = order.iter().map(|&i| coeffs[i].vertex()).collect();
        let weights: Vec<f64> = order.iter().map(|&i| coeffs[i].w).collect();
        let mut distinct = keys.clone();
        distinct.dedup();
        let prefix = |f: &dyn Fn(&Quadratic) -> f64| {
            let mut acc = Vec::with_capacity(order.len() + 1);
            acc.push(0.0);
            let mut run = 0.0;
            for &i in &order {
                run += f(&coeffs[i]);
                acc.push(run);
            }
            acc
        };
        Line {
            prefix_w: prefix(&|q| q.w),
            prefix_a: prefix(&|q| q.a),
            prefix_b: prefix(&|q| q.b),
            keys,
            distinct,
            weights,
        }
    }

    fn group(&self, lo: usize, hi: usize) -> (f64, f64, f64) {
        (
            self.prefix_w[hi] - self.prefix_w[lo],
            self.prefix_a[hi] - self.prefix_a[lo],
            self.prefix_b[hi] - self.prefix_b[lo],
        )
    }

    /// Group boundaries for sorted `centers`; midpoint ties go to the lower code.
    fn splits(&self, centers: &[f64]) -> Vec<usize> {
        let mut b = Vec::with_capacity(centers.len() + 1);
        b.push(0);
        for pair in centers.windows(2) {
            let mid = 0.5 * (pair[0] + pair[1]);
            b.push(self.keys.partition_point(|&v| v <= mid));
        }
        b.push(self.keys.len());
        b
    }

    /// Alternating minimization from `centers`; returns final centers and trace.
    fn refine(&self, mut centers: Vec<f64>, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        centers.sort_by(f64::total_cmp);
        let mut trace = Vec::new();
        let mut previous: Option<Vec<usize>> = None;
        for _ in 0..MAX_ROUNDS {
            let bounds = self.splits(&centers);
            let mut objective = 0.0;
            let mut reseeded = false;
            for (l, c) in centers.iter_mut().enumerate() {
                let (lo, hi) = (bounds[l], bounds[l + 1]);
                if lo == hi {
                    *c = self.keys[rng.gen_range(0..self.keys.len())];
                    reseeded = true;
                    continue;
                }
                let (w, a, b) = self.group(lo, hi);
                *c = -a / (2.0 * w);
                objective += (w * *c + a) * *c + b;
            }
            trace.push(objective);
            centers.sort_by(f64::total_cmp);
            if !reseeded && previous.as_ref() == Some(&bounds) {
                break;
            }
            previous = Some(bounds);
        }
        (centers, trace)
    }

    /// Prefix sums of `w`, `w·m`, `w·m²` over the sorted vertices.
    fn moment_prefix(&self) -> [Vec<f64>; 3] {
        let n = self.keys.len();
        let mut out = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
        for i in 0..n {
            let (w, m) = (self.weights[i], self.keys[i]);
            out[0][i + 1] = out[0][i] + w;
            out[1][i + 1] = out[1][i] + w * m;
            out[2][i + 1] = out[2][i] + w * m * m;
        }
        out
    }

    /// Optimal contiguous partition of the sorted vertices into `s` runs.
    ///
    /// Cost of a run is its weighted spread `Σ w(m − m̄)²`, which differs
    /// from the run's objective by a constant. The cost is Monge, so each
    /// layer is filled by divide and conquer over monotone split points.
    /// Returns the run means.
    fn optimal_partition(&self, s: usize) -> Vec<f64> {
        let n = self.keys.len();
        let [pw, pm, pm2] = self.moment_prefix();
        let cost = |i: usize, j: usize| {
            let w = pw[j] - pw[i];
            if w <= 0.0 {
                return 0.0;
            }
            let m = pm[j] - pm[i];
            (pm2[j] - pm2[i] - m * m / w).max(0.0)
        };
        let mut prev: Vec<f64> = (0..=n).map(|j| cost(0, j)).collect();
        let mut splits: Vec<Vec<u32>> = Vec::with_capacity(s);
        splits.push(vec![0; n + 1]);
        for g in 1..s {
            let mut cur = vec![f64::INFINITY; n + 1];
            let mut arg = vec![0u32; n + 1];
            // cur[j] = min over i in [g, j) of prev[i] + cost(i, j), for j in [g+1, n].
            let mut stack = vec![(g + 1, n, g, n - 1)];
            while let Some((lo, hi, opt_lo, opt_hi)) = stack.pop() {
                if lo > hi {
                    continue;
                }
                let mid = (lo + hi) / 2;
                let mut best = (f64::INFINITY, opt_lo);
                for i in opt_lo..=opt_hi.min(mid - 1) {
                    let v = prev[i] + cost(i, mid);
                    if v < best.0 {
                        best = (v, i);
                    }
                }
                cur[mid] = best.0;
                arg[mid] = best.1 as u32;
                if mid > lo {
                    stack.push((lo, mid - 1, opt_lo, best.1));
                }
                stack.push((mid + 1, hi, best.1, opt_hi));
            }
            prev = cur;
            splits.push(arg);
        }
        let mut bounds = vec![n];
        let mut j = n;
        for g in (1..s).rev() {
            j = splits[g][j] as usize;
            bounds.push(j);
        }
        bounds.push(0);
        bounds.reverse();
        bounds
            .windows(2)
            .map(|b| (pm[b[1]] - pm[b[0]]) / (pw[b[1]] - pw[b[0]]))
            .collect()
    }
}

fn solve(coeffs: &[Quadratic], s: usize, seed: u64) -> ScalarCodebook {
    let line = Line::new(coeffs);
    if line.distinct.len() <= s {
        return finish(coeffs, line.distinct.clone(), Vec::new());
    }
    let init = line.optimal_partition(s);
    let mut rng = rng_for(seed, &[stream::SCALARS]);
    let (centers, trace) = line.refine(init, &mut rng);
    finish(coeffs, centers, trace)
}

/// Alternating minimization from an explicit starting codebook: assign
/// each input to its best code, move every code to the minimizer of its
/// group, repeat until the groups stop changing or 100 rounds pass. Empty
/// groups are re-seeded at a random vertex.
pub fn alternating_minimization(
    coeffs: &[Quadratic],
    init: &[f64],
    seed: u64,
) -> Result<ScalarCodebook> {
    check_quadratics(coeffs, init.len())?;
    let line = Line::new(coeffs);
    let mut rng = rng_for(seed, &[stream::SCALARS]);
    let (centers, trace) = line.refine(init.to_vec(), &mut rng);
    Ok(finish(coeffs, centers, trace))
}

fn check_quadratics(coeffs: &[Quadratic], s: usize) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::EmptyInput("no quadratics to minimize"));
    }
    if s == 0 {
        return Err(Error::InvalidConfig(
            "codebook size must be at least 1".into(),
        ));
    }
    if let Some(q) = coeffs.iter().find(|q| !(q.w > 0.0) || !q.w.is_finite()) {
        return Err(Error::NonConvexQuadratic(q.w));
    }
    if coeffs.iter().any(|q| !q.a.is_finite() || !q.b.is_finite()) {
        return Err(Error::InvalidData(
            "non-finite quadratic coefficient".into(),
        ));
    }
    Ok(())
}

/// Collapses ties, assigns each input to the code nearest its vertex (lower
/// code on ties) and recomputes the objective directly.
fn finish(coeffs: &[Quadratic], mut values: Vec<f64>, trace: Vec<f64>) -> ScalarCodebook {
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mids: Vec<f64> = values.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let assignment: Vec<u32> = coeffs
        .iter()
        .map(|q| mids.partition_point(|&m| m < q.vertex()) as u32)
        .collect();
    let objective = coeffs
        .iter()
        .zip(&assignment)
        .map(|(q, &l)| q.eval(values[l as usize]))
        .sum();
    ScalarCodebook {
        values,
        assignment,
        objective,
        trace,
    }
}

/// 1-D k-means with `s` codes. Inputs with at most `s` distinct values get
/// an exact zero-loss codebook.
pub fn kmeans_1d(values: &[f64], s: usize, seed: u64) -> Result<ScalarCodebook> {
    if values.is_empty() {
        return Err(Error::EmptyInput("kmeans_1d needs at least one value"));
    }
    if s == 0 {
        return Err(Error::InvalidConfig(
            "codebook size must be at least 1".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "non-finite value in kmeans_1d input".into(),
        ));
    }
    let coeffs: Vec<Quadratic> = values
        .iter()
        .map(|&v| Quadratic {
            w: 1.0,
            a: -2.0 * v,
            b: v * v,
        })
        .collect();
    let mut book = solve(&coeffs, s, seed);
    // The loss in squared-distance form avoids the b − a²/4w cancellation.
    book.objective = values
        .iter()
        .zip(&book.assignment)
        .map(|(&v, &l)| (v - book.values[l as usize]).powi(2))
        .sum();
    Ok(book)
}

/// Minimizes `Σᵢ min_l wᵢλ_l² + aᵢλ_l + bᵢ` over `s` shared scalars.
///
/// Starts alternating minimization from the optimal contiguous partition of
/// the per-point minima, so the result is the global optimum and the
/// alternation only confirms the fixed point.
pub fn minimize_quadratic_scalars(
    coeffs: &[Quadratic],
    s: usize,
    seed: u64,
) -> Result<ScalarCodebook> {
    check_quadratics(coeffs, s)?;
    Ok(solve(coeffs, s, seed))
}
