//! Double sparse factorization.
//!
//! Approximates a dense matrix `W` by a product `AB` of two sparse matrices
//! under a shared nonzero budget, using alternating ADMM mask searches. The
//! crate also covers the layer-wise pruning variant driven by calibration
//! statistics, the usual baselines (magnitude pruning, truncated SVD,
//! Monarch) and a reconstruction-error benchmark harness.

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod dsf;
pub mod error;
pub mod formats;
pub mod layerwise;
pub mod numerics;
pub mod rng;
pub mod sparse;

pub use admm::{AdmmState, Schedule, ScheduleMode, SparseRegressionProblem, SparsityMask};
pub use bench::{run_bench, BenchReport, BenchSpec, Generator, Method};
pub use dsf::{dsf_project, BudgetSplit, DsfConfig, FactorPair, SplitPolicy};
pub use error::{DsfError, Result};
pub use layerwise::{prune_layer, LayerCalibration, PruneOptions};
pub use numerics::DenseMatrix;
pub use sparse::SparseFactor;
