use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Which clustering solver quantizes each section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// k-means++ seeding followed by Lloyd iterations.
    Kmeans,
    /// Anisotropic (score-aware) k-clustering with unit scalars.
    #[serde(rename = "scann")]
    Aniso,
    /// Projective k-clustering.
    Pcpq,
    /// Anisotropic projective k-clustering.
    Apcpq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Kmeans, Method::Aniso, Method::Pcpq, Method::Apcpq];

    pub fn id(self) -> u32 {
        match self {
            Method::Kmeans => 0,
            Method::Aniso => 1,
            Method::Pcpq => 2,
            Method::Apcpq => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Kmeans => "kmeans",
            Method::Aniso => "scann",
            Method::Pcpq => "pcpq",
            Method::Apcpq => "apcpq",
        }
    }

    pub fn is_projective(self) -> bool {
        matches!(self, Method::Pcpq | Method::Apcpq)
    }

    pub fn is_anisotropic(self) -> bool {
        matches!(self, Method::Aniso | Method::Apcpq)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "kmeans++" => Ok(Method::Kmeans),
            "scann" | "aniso" => Ok(Method::Aniso),
            "pcpq" => Ok(Method::Pcpq),
            "apcpq" => Ok(Method::Apcpq),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// How the solvers pick their starting centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Start from the converged solution of the simpler baseline: k-means++
    /// for k-means, projective and anisotropic clustering; the anisotropic
    /// k-clustering solution for anisotropic projective clustering.
    #[default]
    Warm,
    /// k-means++ seeds only.
    Seeding,
    /// Sign-aware D² sampling over unit-normalized points.
    NormalizedSampling,
}

/// Upper limit of the angular integrals behind the anisotropic weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdAngle {
    /// θmax = arccos(min(t/‖x‖, 1)): zero weight at ‖x‖ ≤ t, isotropic as ‖x‖ → ∞.
    #[default]
    Arccos,
    /// θmax = clamp(t/‖x‖, 0, π/2), the ratio read literally.
    Ratio,
}

impl ThresholdAngle {
    pub fn theta_max(self, t: f64, norm: f64) -> f64 {
        match self {
            ThresholdAngle::Arccos => (t / norm).clamp(0.0, 1.0).acos(),
            ThresholdAngle::Ratio => (t / norm).clamp(0.0, std::f64::consts::FRAC_PI_2),
        }
    }
}

/// User-facing build parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PQConfig {
    pub m: usize,
    pub k: usize,
    pub s: usize,
    pub method: Method,
    pub quantize_scalars: bool,
    pub t_frac: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default)]
    pub threshold: ThresholdAngle,
}

impl PQConfig {
    pub fn new(method: Method, m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            s: 8,
            method,
            quantize_scalars: true,
            t_frac: 0.2,
            max_iters: 20,
            tol: 1e-6,
            seed: 0,
            init: InitMode::Warm,
            threshold: ThresholdAngle::Arccos,
        }
    }

    pub fn with_s(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_quantized_scalars(mut self, on: bool) -> Self {
        self.quantize_scalars = on;
        self
    }

    /// Conventional label of the center budget: `k = 2^b` reads as "b-bit".
    pub fn bit_label(&self) -> String {
        bit_label(self.k)
    }

    /// How scalars are stored for this configuration.
    pub fn scalar_mode(&self) -> ScalarMode {
        if !self.method.is_projective() {
            ScalarMode::Unit
        } else if self.quantize_scalars {
            ScalarMode::Quantized(self.s)
        } else {
            ScalarMode::Raw
        }
    }
}

pub fn bit_label(k: usize) -> String {
    if k.is_power_of_two() {
        format!("{}-bit", k.trailing_zeros())
    } else {
        format!("k={k}")
    }
}

/// Per-point scalar storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMode {
    /// Every scalar is 1 (non-projective methods); no scalar stage.
    Unit,
    /// Scalars snapped to `s` values per section.
    Quantized(usize),
    /// Unquantized f32 scalar per (point, section).
    Raw,
}

/// A configuration checked against a dataset, with derived fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: PQConfig,
    pub n: usize,
    pub d: usize,
    pub padded_d: usize,
    pub dbar: usize,
    /// Anisotropic threshold, `t_frac` times the mean row norm.
    pub t: f64,
}

/// Checks `config` against `dataset` and derives padding and threshold.
pub fn validate_config(config: &PQConfig, dataset: &Dataset) -> Result<ResolvedConfig> {
    let bad = |msg: String| Err(Error::InvalidConfig(msg));
    let d = dataset.d();
    if config.m == 0 {
        return bad("m must be at least 1".into());
    }
    if config.m > d {
        return bad(format!("m = {} exceeds dimension {d}", config.m));
    }
    if config.k < 2 {
        return bad(format!("k = {} must be at least 2", config.k));
    }
    if config.k as u64 >= 1u64 << 32 {
        return bad(format!("k = {} must be below 2^32", config.k));
    }
    if config.s == 0 {
        return bad("s must be at least 1".into());
    }
    if config.s >= 1 << 16 {
        return bad(format!("s = {} must be below 2^16", config.s));
    }
    if !config.t_frac.is_finite() || config.t_frac < 0.0 {
        return bad(format!(
            "t_frac = {} must be finite and non-negative",
            config.t_frac
        ));
    }
    if config.max_iters == 0 {
        return bad("max_iters must be at least 1".into());
    }
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return bad(format!("tol = {} must be positive", config.tol));
    }
    let padded_d = d.div_ceil(config.m) * config.m;
    let dbar = padded_d / config.m;
    if config.method.is_anisotropic() && dbar < 2 {
        return bad(format!(
            "anisotropic methods need at least 2 coordinates per section, got {dbar}"
        ));
    }
    Ok(ResolvedConfig {
        config: config.clone(),
        n: dataset.n(),
        d,
        padded_d,
        dbar,
        t: config.t_frac * dataset.mean_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(n: usize, d: usize) -> Dataset {
        let mut data = vec![0.0f32; n * d];
        for i in 0..n {
            data[i * d + i % d] = 1.0;
        }
        Dataset::new(n, d, data, "unit").unwrap()
    }

    #[test]
    fn derives_section_width() {
        let ds = unit_rows(4, 100);
        let r = validate_config(&PQConfig::new(Method::Pcpq, 25, 16), &ds).unwrap();
        assert_eq!((r.padded_d, r.dbar), (100, 4));

        let ds = unit_rows(4, 65);
        let r = validate_config(&PQConfig::new(Method::Pcpq, 16, 16), &ds).unwrap();
        assert_eq!((r.padded_d, r.dbar), (80, 5));
    }

    #[test]
    fn threshold_tracks_mean_norm() {
        let ds = unit_rows(6, 8);
        let mut cfg = PQConfig::new(Method::Apcpq, 2, 2);
        cfg.t_frac = 0.2;
        let r = validate_config(&cfg, &ds).unwrap();
        assert!((r.t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let ds = unit_rows(4, 8);
        let base = PQConfig::new(Method::Kmeans, 2, 4);
        let cases: Vec<PQConfig> = vec![
            PQConfig {
                m: 9,
                ..base.clone()
            },
            PQConfig {
                m: 0,
                ..base.clone()
            },
            PQConfig {
                k: 1,
                ..base.clone()
            },
            PQConfig {
                k: 1usize << 32,
                ..base.clone()
            },
            PQConfig {
                s: 0,
                ..base.clone()
            },
            PQConfig {
                s: 1 << 16,
                ..base.clone()
            },
            PQConfig {
                t_frac: f64::NAN,
                ..base.clone()
            },
            PQConfig {
                t_frac: f64::INFINITY,
                ..base.clone()
            },
            PQConfig {
                max_iters: 0,
                ..base.clone()
            },
            PQConfig {
                tol: 0.0,
                ..base.clone()
            },
            PQConfig {
                method: Method::Apcpq,
                m: 8,
                ..base.clone()
            },
        ];
        for cfg in cases {
            assert!(
                matches!(validate_config(&cfg, &ds), Err(Error::InvalidConfig(_))),
                "{cfg:?} accepted"
            );
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let ds = unit_rows(5, 7);
        let cfg = PQConfig::new(Method::Pcpq, 3, 4);
        let a = validate_config(&cfg, &ds).unwrap();
        let b = validate_config(&a.config, &ds).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bit_labels() {
        assert_eq!(bit_label(16), "4-bit");
        assert_eq!(bit_label(256), "8-bit");
        assert_eq!(bit_label(12), "k=12");
    }
}
