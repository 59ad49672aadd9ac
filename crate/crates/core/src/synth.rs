//! Synthetic datasets.

use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Independent standard normal coordinates.
    Gaussian,
    /// Uniform on the unit sphere.
    UnitSphere,
    /// Unit vectors scattered around a fixed set of random directions.
    Clustered,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "unit-sphere" => Ok(Distribution::UnitSphere),
            "clustered" => Ok(Distribution::Clustered),
            other => Err(Error::InvalidConfig(format!(
                "unknown distribution {other:?}"
            ))),
        }
    }
}

/// Number of cluster directions in the clustered distribution.
pub const CLUSTERS: usize = 64;
/// Per-coordinate noise scale around a cluster direction, relative to 1/√d.
pub const CLUSTER_SPREAD: f64 = 0.75;

fn gaussian_vec(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn draw(dist: Distribution, n: usize, d: usize, seed: u64, label: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "cannot generate {n}×{d} data"
        )));
    }
    let mut rng = rng_for(seed, &[label]);
    let centers: Vec<Vec<f64>> = if dist == Distribution::Clustered {
        let mut crng = rng_for(seed, &[stream::DATA, stream::CLUSTER]);
        (0..CLUSTERS)
            .map(|_| {
                let mut c = gaussian_vec(&mut crng, d);
                normalize(&mut c);
                c
            })
            .collect()
    } else {
        Vec::new()
    };
    let spread = CLUSTER_SPREAD / (d as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut v = gaussian_vec(&mut rng, d);
        match dist {
            Distribution::Gaussian => {}
            Distribution::UnitSphere => normalize(&mut v),
            Distribution::Clustered => {
                let c = &centers[rng.gen_range(0..CLUSTERS)];
                v.iter_mut()
                    .zip(c)
                    .for_each(|(x, ci)| *x = ci + spread * *x);
                normalize(&mut v);
            }
        }
        data.extend(v.iter().map(|&x| x as f32));
    }
    Dataset::new(n, d, data, format!("synthetic {dist:?} seed {seed}"))
}

/// `n` points of dimension `d`.
pub fn generate(dist: Distribution, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    draw(dist, n, d, seed, stream::DATA)
}

/// Queries from the same distribution as [`generate`] with the same seed,
/// drawn from an independent stream.
pub fn generate_queries(dist: Distribution, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    draw(dist, n, d, seed, stream::QUERIES)
}
