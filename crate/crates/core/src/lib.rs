//! Joint optimization of consensus edge weights and leader turning angles for
//! a leader-follower rover swarm.
//!
//! The crate is layered bottom-up:
//!
//! * [`swarm`] holds the agent graph, row-stochastic weights and the
//!   consensus/kinematics rollout.
//! * [`objectives`] scores a trajectory: explored area (exact and smoothed),
//!   heading RSS, the utopia-normalized pseudo-objectives and their weighted sum.
//! * [`constraints`] lays out the design vector and evaluates equality and
//!   spacing residuals, finite-difference Jacobians and feasibility.
//! * [`sqp`] is a dense SQP solver (active-set QP, damped BFGS, l1 merit line
//!   search) with the utopia and multi-start drivers.
//! * [`scenario`] binds it all into scenario files, result bundles and
//!   output artifacts.
//! * [`cli`] is the `swarm-sqp` command line.

pub mod cli;
pub mod constraints;
pub mod objectives;
pub mod scenario;
pub mod sqp;
pub mod swarm;
