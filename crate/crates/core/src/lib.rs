//! Product quantization for maximum inner product search, with projective
//! and anisotropic projective clustering of each section and quantized
//! per-point scalars.
//!
//! The build pipeline is: [`config::validate_config`] → per-section
//! clustering ([`clustering`]) → scalar quantization ([`scalar_quant`]) →
//! [`pq_index::PQIndex`], optionally behind an inverted file ([`ivf`]).
//! Queries build a [`pq_index::LookupTable`] once and score every point
//! with `m` table reads.

pub mod clustering;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ivf;
pub mod matrix;
pub mod numerics;
pub mod pq_index;
pub mod rng;
pub mod scalar_quant;
pub mod synth;

pub use config::{validate_config, InitMode, Method, PQConfig, ResolvedConfig, ThresholdAngle};
pub use dataset::Dataset;
pub use error::{Error, FormatError, Result};
pub use ivf::IVFIndex;
pub use pq_index::PQIndex;
