//! Subset selection with submodular information measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: cosine similarity kernels over a joint ground set of
//!   unlabeled, query and private items, plus the on-disk kernel cache.
//! - [`submod`]: facility location and log-determinant set functions with
//!   memoized marginal gains.
//! - [`sim`]: the mutual information, conditional gain and conditional mutual
//!   information instantiations of both base functions, and the generic
//!   set-arithmetic definitions used to check them.
//! - [`optimizer`]: naive, lazy and stochastic greedy maximization.
//! - [`model`]: a linear softmax classifier producing predictions and
//!   last-layer gradient embeddings.
//! - [`strategies`]: one acquisition round for every supported strategy.
//! - [`harness`]: the active learning loop, synthetic OOD scenarios, file
//!   formats, penalty matrices and plot data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kernel;
pub mod model;
pub mod optimizer;
pub mod sim;
pub mod strategies;
pub mod submod;

pub use error::{Error, Result};
pub use kernel::{EmbeddingMatrix, Region, SimilarityKernel};
pub use model::{SoftmaxClassifier, TrainConfig};
pub use optimizer::{GreedyOptions, OptimizerKind, SelectionResult, SetObjective};
pub use sim::{AcquisitionObjective, SimVariant};
pub use strategies::{StrategyKind, StrategySpec};
pub use submod::{FacilityLocation, FacilityLocationState, LogDet, LogDetState};
