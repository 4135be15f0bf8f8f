//! Scenario files, the end-to-end optimization pipeline, result bundles and
//! output artifacts.

mod artifacts;
mod builtin;
mod compare;
mod config;
mod run;

pub use artifacts::{
    headings_csv, parse_headings_csv, parse_weights_csv, path_csv, to_json, weights_csv,
    write_rollout_artifacts, write_run_artifacts, write_utopia_artifacts, ArtifactFormat,
    ArtifactKind, OutputArtifact, RolloutSummary, RunSummary, SubproblemSummary, UtopiaSummary,
    HEADINGS_FILE, PATH_FILE, SUMMARY_FILE, TIMING_FILE, WEIGHTS_FILE,
};
pub use builtin::{builtin_names, builtin_scenarios, builtin_source, resolve_scenario};
pub use compare::{
    compare_to_reference, compare_weights, RowDiff, StructuralDiffReport, BOUND_TOL,
};
pub use config::{ConsensusUtopia, Formation, ScenarioConfig};
pub use run::{heading_table_deg, replay, run_scenario, ObjectiveBreakdown, ResultBundle};

use thiserror::Error;

use crate::sqp::{SqpError, UtopiaError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("bad override: {0}")]
    Override(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Utopia(#[from] UtopiaError),
    #[error(transparent)]
    Solver(#[from] SqpError),
    #[error("no feasible solution found: {}", .0.feasibility.violations.join("; "))]
    Infeasible(Box<ResultBundle>),
}
