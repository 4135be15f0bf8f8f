//! Exploration and consensus objectives and their weighted scalarization.

mod coverage;
mod grid;

pub use coverage::{
    coverage_exact, coverage_smooth, explored_area_exact, explored_area_smooth, CoverageBreakdown,
    SmoothingParams,
};
pub use grid::GridSpec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::swarm::SwarmTrajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("objective weights must be non-negative and sum to one, got a1={a1}, a2={a2}")]
    InvalidWeights { a1: f64, a2: f64 },
    #[error("invalid utopia points: f_min1={f_min1} must be > 0 and f_min2={f_min2} >= 0")]
    InvalidUtopia { f_min1: f64, f_min2: f64 },
    #[error("smoothing parameters must be positive and finite: {0:?}")]
    InvalidSmoothing(SmoothingParams),
}

/// Convex weights of the two pseudo-objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub a1: f64,
    pub a2: f64,
}

impl ObjectiveWeights {
    pub fn new(a1: f64, a2: f64) -> Result<Self, ObjectiveError> {
        if a1 >= 0.0 && a2 >= 0.0 && (a1 + a2 - 1.0).abs() <= 1e-12 {
            Ok(Self { a1, a2 })
        } else {
            Err(ObjectiveError::InvalidWeights { a1, a2 })
        }
    }
}

/// Objective values reached when each objective is optimized alone.
/// `f_min1` is the best (largest) explored area, `f_min2` the best
/// (smallest) heading RSS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtopiaPoints {
    pub f_min1: f64,
    pub f_min2: f64,
}

impl UtopiaPoints {
    pub fn new(f_min1: f64, f_min2: f64) -> Result<Self, ObjectiveError> {
        if f_min1 > 0.0 && f_min2 >= 0.0 && f_min1.is_finite() && f_min2.is_finite() {
            Ok(Self { f_min1, f_min2 })
        } else {
            Err(ObjectiveError::InvalidUtopia { f_min1, f_min2 })
        }
    }
}

/// Normalization of the exploration pseudo-objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi1Variant {
    /// `f_min1 / |f1 - f_min1|`
    #[default]
    InverseGap,
    /// `f_min1 / f1`
    Ratio,
}

/// Sum over `t = 1..=T` and every cooperative agent of the squared heading
/// difference to the leader, in radians squared.
pub fn consensus_rss(traj: &SwarmTrajectory) -> f64 {
    traj.states
        .iter()
        .skip(1)
        .map(|s| {
            let leader = s.headings[s.leader()];
            s.headings[..s.leader()]
                .iter()
                .map(|x| (x - leader).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Utopia-normalized pseudo-objectives `(phi1, phi2)` with every
/// denominator clamped below by `eps`.
pub fn pseudo_objectives(
    f1: f64,
    f2: f64,
    u: &UtopiaPoints,
    eps: f64,
    variant: Phi1Variant,
) -> (f64, f64) {
    let phi1 = match variant {
        Phi1Variant::InverseGap => u.f_min1 / (f1 - u.f_min1).abs().max(eps),
        Phi1Variant::Ratio => u.f_min1 / f1.max(eps),
    };
    let phi2 = (f2 - u.f_min2).abs() / u.f_min2.max(eps);
    (phi1, phi2)
}

pub fn scalarize(phi1: f64, phi2: f64, w: &ObjectiveWeights) -> f64 {
    w.a1 * phi1 + w.a2 * phi2
}
