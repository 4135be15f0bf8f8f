//! Sequential quadratic programming with damped BFGS and an ℓ1 merit
//! function, plus the swarm design problem built on it.

mod bfgs;
mod line_search;
mod qp;
mod solver;
mod swarm;

pub use bfgs::bfgs_update;
pub use line_search::{line_search, LineSearchOutcome};
pub use qp::{qp_kkt_residual, solve_qp_subproblem, QpError, QpSolution, QpSubproblem};
pub use solver::{
    sqp_minimize, MeritRecord, NlpProblem, NlpValues, SolveReport, SolverConfig, SqpError, Status,
};
pub use swarm::{
    canonical_start, compute_utopia, metropolis_consensus, multistart, nominal_headings,
    starting_points, MultistartError, MultistartReport, ObjectiveKind, StartSummary, SwarmProblem,
    UtopiaError, UtopiaReport, UtopiaSolve,
};
