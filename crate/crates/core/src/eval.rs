//! Ground truth, the two retrieval metrics, and evaluation reports.
//!
//! Relative error is taken at the exact top-1 point:
//! `|⟨q,x*⟩ − score(x*)| / |⟨q,x*⟩|`. A query scores a Recall1@N hit when
//! the best exact inner product among its `N` retrieved ids reaches the
//! global maximum.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pq_index::OpCounter;
use crate::rng::{rng_for, stream};

/// Queries whose exact top score is at most this are excluded from the
/// relative error.
pub const MIN_TOP_SCORE: f64 = 1e-12;

/// Best `n` candidates by score, ties by lower id.
pub fn top_n(mut candidates: Vec<(u32, f32)>, n: usize) -> Vec<(u32, f32)> {
    let order = |a: &(u32, f32), b: &(u32, f32)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if n < candidates.len() {
        if n == 0 {
            return Vec::new();
        }
        candidates.select_nth_unstable_by(n - 1, order);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(order);
    candidates
}

/// `⟨x, q⟩` accumulated in f64.
pub fn exact_ip(x: &[f32], q: &[f32]) -> f64 {
    x.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Exact top `n` of `data` for `q`, best first, ties by lower id.
pub fn brute_force_top_n(data: &Dataset, q: &[f32], n: usize) -> Result<Vec<(u32, f64)>> {
    if q.len() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            found: q.len(),
        });
    }
    let mut all: Vec<(u32, f64)> = data
        .rows()
        .enumerate()
        .map(|(i, x)| (i as u32, exact_ip(x, q)))
        .collect();
    let order = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if n < all.len() && n > 0 {
        all.select_nth_unstable_by(n - 1, order);
    }
    all.truncate(n);
    all.sort_unstable_by(order);
    Ok(all)
}

/// Exact top `n` for every query, in parallel.
pub fn ground_truth(data: &Dataset, queries: &Dataset, n: usize) -> Result<Vec<Vec<(u32, f64)>>> {
    (0..queries.n())
        .into_par_iter()
        .map(|i| brute_force_top_n(data, queries.row(i), n))
        .collect()
}

/// `|exact − approx| / |exact|`; fails when `|exact|` is at most [`MIN_TOP_SCORE`].
pub fn relative_error_top1(approx: f64, exact: f64) -> Result<f64> {
    if exact.abs() <= MIN_TOP_SCORE {
        return Err(Error::InvalidData(format!(
            "exact top score {exact} is too close to zero"
        )));
    }
    Ok((exact - approx).abs() / exact.abs())
}

/// Whether the first `n` retrieved ids contain a point whose exact score
/// reaches `best`.
pub fn recall1_hit(retrieved: &[u32], n: usize, best: f64, exact: impl Fn(u32) -> f64) -> bool {
    retrieved.iter().take(n).any(|&id| exact(id) >= best)
}

/// Mean of `⟨g, x − αc⟩²` over standard Gaussian `g`, next to `‖x − αc‖²`.
pub fn isotropy_check(
    x: &[f64],
    alpha: f64,
    c: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "{samples} samples is below the 10⁴ minimum"
        )));
    }
    if x.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: c.len(),
        });
    }
    let r: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - alpha * b).collect();
    let mut rng = rng_for(seed, &[stream::BASELINE]);
    let mut total = 0.0;
    for _ in 0..samples {
        let dot: f64 = r
            .iter()
            .map(|v| v * rng.sample::<f64, _>(StandardNormal))
            .sum();
        total += dot * dot;
    }
    Ok((total / samples as f64, r.iter().map(|v| v * v).sum()))
}

/// Metrics of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query: usize,
    pub top1_id: u32,
    pub top1_score: f64,
    pub approx_score: Option<f64>,
    pub relative_error: Option<f64>,
    /// Hit flag for each requested N, in `recall_at` order.
    pub hits: Vec<bool>,
}

/// Wall-clock seconds per stage; left out of reports unless requested,
/// since they break byte-identical reruns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub build_s: Option<f64>,
    pub query_s: Option<f64>,
    pub eval_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub method: Option<String>,
    pub n: usize,
    pub d: usize,
    pub queries: usize,
    /// Queries left out of the relative error (exact top score near zero).
    pub excluded_queries: usize,
    pub mean_relative_error: Option<f64>,
    pub relative_errors: Vec<f64>,
    pub recall_at: Vec<usize>,
    /// `N → Recall1@N`.
    pub recall1_at: BTreeMap<usize, f64>,
    pub op_counters: OpCounter,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_times: Option<WallTimes>,
    #[serde(skip)]
    pub per_query: Vec<QueryEval>,
}

/// Inputs to [`evaluate`].
pub struct EvalInput<'a> {
    pub data: &'a Dataset,
    pub queries: &'a Dataset,
    /// Exact top-1 id per query.
    pub truth: &'a [u32],
    /// Approximate ranking per query, best first.
    pub retrieved: &'a [Vec<u32>],
    /// Approximate score of each query's exact top-1 point, when known.
    pub approx_at_truth: Option<&'a [f32]>,
    pub recall_at: &'a [usize],
}

/// Computes both metrics over a query set.
pub fn evaluate(input: &EvalInput<'_>) -> Result<EvalReport> {
    let nq = input.queries.n();
    if input.truth.len() != nq || input.retrieved.len() != nq {
        return Err(Error::DimensionMismatch {
            expected: nq,
            found: input.truth.len().min(input.retrieved.len()),
        });
    }
    if input.queries.d() != input.data.d() {
        return Err(Error::DimensionMismatch {
            expected: input.data.d(),
            found: input.queries.d(),
        });
    }
    if let Some(a) = input.approx_at_truth {
        if a.len() != nq {
            return Err(Error::DimensionMismatch {
                expected: nq,
                found: a.len(),
            });
        }
    }
    if input.recall_at.contains(&0) {
        return Err(Error::InvalidConfig(
            "recall cutoffs must be at least 1".into(),
        ));
    }
    let n = input.data.n();
    if let Some(&bad) = input
        .truth
        .iter()
        .chain(input.retrieved.iter().flatten())
        .find(|&&id| id as usize >= n)
    {
        return Err(Error::InvalidData(format!(
            "id {bad} out of range for {n} points"
        )));
    }
    let per_query: Vec<QueryEval> = (0..nq)
        .into_par_iter()
        .map(|qi| {
            let q = input.queries.row(qi);
            let exact = |id: u32| exact_ip(input.data.row(id as usize), q);
            let top1 = input.truth[qi];
            let best = exact(top1);
            let approx = input.approx_at_truth.map(|a| a[qi] as f64);
            QueryEval {
                query: qi,
                top1_id: top1,
                top1_score: best,
                approx_score: approx,
                relative_error: approx.and_then(|a| relative_error_top1(a, best).ok()),
                hits: input
                    .recall_at
                    .iter()
                    .map(|&cut| recall1_hit(&input.retrieved[qi], cut, best, exact))
                    .collect(),
            }
        })
        .collect();
    let relative_errors: Vec<f64> = per_query.iter().filter_map(|p| p.relative_error).collect();
    let excluded = if input.approx_at_truth.is_some() {
        nq - relative_errors.len()
    } else {
        0
    };
    let recall1_at = input
        .recall_at
        .iter()
        .enumerate()
        .map(|(slot, &cut)| {
            let hits = per_query.iter().filter(|p| p.hits[slot]).count();
            (cut, hits as f64 / nq.max(1) as f64)
        })
        .collect();
    Ok(EvalReport {
        label: String::new(),
        method: None,
        n,
        d: input.data.d(),
        queries: nq,
        excluded_queries: excluded,
        mean_relative_error: (!relative_errors.is_empty())
            .then(|| relative_errors.iter().sum::<f64>() / relative_errors.len() as f64),
        relative_errors,
        recall_at: input.recall_at.to_vec(),
        recall1_at,
        op_counters: OpCounter::default(),
        config: None,
        wall_times: None,
        per_query,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per query.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,top1_id,top1_score,approx_score,relative_error");
        for cut in &self.recall_at {
            out.push_str(&format!(",hit_at_{cut}"));
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.per_query {
            out.push_str(&format!(
                "{},{},{},{},{}",
                p.query,
                p.top1_id,
                p.top1_score,
                opt(p.approx_score),
                opt(p.relative_error)
            ));
            for &h in &p.hits {
                out.push_str(if h { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}
