//! Penalized least squares with ℓ1, group, sorted-ℓ1 and cone-generated
//! penalties: solvers, dual geometry checks, compatibility constants and
//! Monte Carlo concentration of the prediction error.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod model;
pub mod normal;
pub mod penalties;
pub mod report;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{DesignMatrix, Observation, Problem};
pub use penalties::{GroupPartition, Penalty, PenaltyKind, PolyhedralCone, SlopeWeights};
pub use report::CheckReport;
pub use solvers::{solve, SolverConfig, SolverResult};
