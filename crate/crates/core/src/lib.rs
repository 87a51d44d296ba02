//! Binary text classification from character and word n-grams.
//!
//! The pipeline: extract n-gram counts over a training corpus, weight them
//! with BM25 statistics fitted on that corpus, L2-normalize each document,
//! and train class-weighted L2-regularized logistic regression, with
//! hyperparameters picked by stratified cross-validated grid search.
//! Multi-label corpora are handled as independent binary problems whose
//! predictions are concatenated.
//!
//! The numeric kernels are generic over the scalar type ([`Scalar`], f32 or
//! f64); the aliases at the crate root fix f64 for ordinary use.

// Validation guards are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod linear;
pub mod metrics;
pub mod ngrams;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tuning;
pub mod weighting;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision corpus statistics.
pub type Stats = weighting::CorpusStats<f64>;
/// Default-precision weighted document vector.
pub type DocVector = weighting::WeightedVector<f64>;
/// Default-precision solver settings.
pub type TrainSettings = linear::TrainConfig<f64>;
/// Default-precision trained model.
pub type Model = linear::ModelWeights<f64>;
/// Default-precision saved-model container.
pub type ModelBundle = linear::ModelFile<f64>;
/// Default-precision training collection.
pub type TrainData = linear::Dataset<f64>;
/// Default-precision hyperparameter grid.
pub type Grid = tuning::GridSpec<f64>;
/// Default-precision grid-search outcome.
pub type GridOutcome = tuning::CvResult<f64>;
/// Default-precision evaluation report.
pub type Report = metrics::EvalReport<f64>;
