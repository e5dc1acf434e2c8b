//! Debiased recommendation with a small randomized feedback log.
//!
//! A recommender trained on feedback logged by its own stochastic policy
//! inherits that policy's biases. When a small log collected under uniform
//! exposure is also available, the loss against the complete uniform-policy
//! feedback matrix can be upper-bounded by terms that are either directly
//! optimizable or measurable. This crate provides:
//!
//! * [`data`] and [`world`]: datasets, splitters and a synthetic feedback world
//!   with complete counterfactual ground truth,
//! * [`loss`]: pointwise losses, partial losses and premise checkers,
//! * [`model`]: a matrix-factorization backbone with hand-derived gradients
//!   and an Adam optimizer,
//! * [`objective`] and [`train`]: the compared training objectives, the
//!   two-phase refinement loop, early stopping and grid search,
//! * [`bounds`]: exact evaluation of the upper-bound terms on synthetic worlds,
//! * [`metrics`]: AUC, nDCG, P@K, R@K, popularity and cumulative-hit analyses.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel orchestration live in the `dubrec` companion crate.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod data;
mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod rng;
pub mod scenario;
pub mod train;
pub mod world;

pub use error::{Error, Result};

pub use bounds::{BoundConfig, BoundReport, BoundVariant};
pub use data::{Dataset, Interaction, Regime};
pub use loss::{ConstraintReport, LossKind, LossVariant};
pub use metrics::{MetricsReport, PopularityReport, Scorer};
pub use model::{FactorModel, OptimizerState};
pub use objective::{Method, MethodConfig, Term};
pub use train::{TrainConfig, TrainResult};
pub use world::{SyntheticWorld, WorldSpec};
