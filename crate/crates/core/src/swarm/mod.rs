//! Agent network, consensus heading updates and planar kinematics.

mod dynamics;
mod graph;
mod weights;

pub(crate) use dynamics::rollout_raw;
pub use dynamics::{consensus_step, kinematics_step, rollout, SwarmState, SwarmTrajectory};
pub use graph::{metropolis_weights, AgentGraph, MetropolisWeights};
pub use weights::{WeightMatrix, ROW_SUM_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwarmError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        expected: usize,
        found: usize,
        what: &'static str,
    },
    #[error("weights are not row-stochastic and non-negative (row sums: {row_sums:?})")]
    InvalidWeights { row_sums: Vec<f64> },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("step length must be positive, got {0}")]
    InvalidStepLength(f64),
}
