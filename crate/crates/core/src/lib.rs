//! Semi-supervised entity resolution with adversarially trained label
//! generator and discriminator networks.
//!
//! The pipeline runs record files through q-gram featurization into
//! [`features::Instance`] vectors, median-splits the feature space into
//! subspaces ([`subspace`]), and trains a generator `G` that proposes labels
//! for unlabeled pairs against a discriminator `D` that judges
//! `(instance, label)` pairs ([`trainer`]). After each batch-training phase
//! the pseudo labels `D` trusts most are propagated into the labeled pool,
//! until every instance carries a label. [`eval`] holds the metrics and
//! ablation harness.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod subspace;
pub mod trainer;

pub use error::{Error, Result};
pub use features::{Instance, InstancePool, Label};
pub use trainer::{TrainConfig, Variant};
