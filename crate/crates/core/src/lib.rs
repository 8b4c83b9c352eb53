//! Cross-fold quality scoring and stratified selection for learning from
//! noisy ordinal labels with a binary decision boundary.
//!
//! The core types are generic over the floating-point scalar; `f64` and
//! `f32` aliases are provided below.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod relabel;
pub mod scalar;
pub mod seed;
pub mod sncv;
pub mod synth;
pub mod trainer;

pub use dataset::{ClassScheme, Example, Fold};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use trainer::Hyperparams;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Example64 = dataset::Example<f64>;
pub type Model64 = trainer::Model<f64>;
pub type Model32 = trainer::Model<f32>;
pub type ScoredDataset64 = sncv::ScoredDataset<f64>;
pub type ScoredDataset32 = sncv::ScoredDataset<f32>;
pub type RocResult64 = metrics::RocResult<f64>;
pub type DelongComparison64 = metrics::DelongComparison<f64>;
