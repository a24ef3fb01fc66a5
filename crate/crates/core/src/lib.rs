//! Statistically preconditioned accelerated gradient (SPAG) for distributed
//! empirical risk minimization, with DANE, heavy-ball DANE, Nesterov and
//! plain gradient baselines on a simulated server/worker cluster, bound
//! calculators for the relative condition number and Hessian concentration
//! checks.

pub mod algorithms;
pub mod bregman;
pub mod concentration;
pub mod data;
pub mod error;
pub mod harness;
pub mod inner;
pub mod linalg;
pub mod losses;
mod newton;
pub mod tuning;

pub use algorithms::{AlgorithmParams, AlgorithmRegistry, Optimizer, StepReport};
pub use bregman::{Preconditioner, RelativeConstants};
pub use data::SparseDataset;
pub use error::{Error, Result};
pub use harness::{Cluster, IterationRecord, ReferenceSolution, StopRule};
pub use losses::{LossKind, RegularizedLoss};
