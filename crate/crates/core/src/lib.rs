//! Feature selection for incomplete multi-label data.
//!
//! The selector learns a row-sparse projection `W` from features to a
//! reconstructed label matrix `QYU`, where `Q` expresses each sample through
//! the other samples and `U` each label dimension through the other
//! dimensions. Missing labels are excluded from the reconstruction loss by an
//! observation mask. Features are ranked by the row norms of `W`.
//!
//! Around the selector sit the pieces needed to evaluate it: an ML-KNN
//! classifier, four multi-label metrics, missing-label simulation, a
//! Friedman test, and an experiment harness.

pub mod data;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod mlknn;
pub mod ranking;
pub mod redundancy;
pub mod solver;

pub use data::{normalize_features, Dataset, FeatureMatrix, LabelMatrix, MaskMatrix, Normalization, Orientation};
pub use error::{Error, Result};
pub use metrics::MetricReport;
pub use ranking::{rank_features, select_top, Budget, FeatureRanking};
pub use solver::{fit, Ablation, Hyperparams, ModelState};
