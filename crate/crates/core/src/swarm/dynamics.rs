use serde::{Deserialize, Serialize};

use super::{SwarmError, WeightMatrix};

/// Headings (radians, unwrapped) and planar positions of every agent at one
/// integer time step. The leader is the last agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub headings: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    pub t: usize,
}

impl SwarmState {
    pub fn new(headings: Vec<f64>, positions: Vec<[f64; 2]>) -> Result<Self, SwarmError> {
        if headings.len() != positions.len() {
            return Err(SwarmError::Dimension {
                expected: headings.len(),
                found: positions.len(),
                what: "positions",
            });
        }
        if headings.len() < 2 {
            return Err(SwarmError::Dimension {
                expected: 2,
                found: headings.len(),
                what: "agents",
            });
        }
        Ok(Self {
            headings,
            positions,
            t: 0,
        })
    }

    pub fn agents(&self) -> usize {
        self.headings.len()
    }

    pub fn leader(&self) -> usize {
        self.headings.len() - 1
    }
}

/// States for `t = 0..=T` produced by a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmTrajectory {
    pub states: Vec<SwarmState>,
    pub step_length: f64,
}

impl SwarmTrajectory {
    /// Number of steps `T` (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn agents(&self) -> usize {
        self.states.first().map_or(0, SwarmState::agents)
    }

    pub fn final_state(&self) -> &SwarmState {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// Every sampled position of every agent, time-major.
    pub fn positions(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.states.iter().flat_map(|s| s.positions.iter().copied())
    }
}

/// Advances a position one step of length `step_length` along `heading`.
/// Heading zero points along +Y; positive headings move toward +X.
pub fn kinematics_step(position: [f64; 2], heading: f64, step_length: f64) -> [f64; 2] {
    let (s, c) = heading.sin_cos();
    [position[0] + step_length * s, position[1] + step_length * c]
}

/// One consensus update: cooperative agents take their weighted average of
/// the previous headings, the leader takes `leader_heading_next`, and every
/// agent then moves one step along its new heading.
pub fn consensus_step(
    state: &SwarmState,
    weights: &WeightMatrix,
    leader_heading_next: f64,
    step_length: f64,
) -> Result<SwarmState, SwarmError> {
    if weights.agents() != state.agents() {
        return Err(SwarmError::Dimension {
            expected: state.agents(),
            found: weights.agents(),
            what: "weight matrix agents",
        });
    }
    Ok(advance(
        state,
        weights.rows(),
        leader_heading_next,
        step_length,
    ))
}

/// Unchecked step over raw weight rows. Used by the optimizer, whose trial
/// iterates need not be row-stochastic.
pub(crate) fn advance(
    state: &SwarmState,
    rows: &[impl AsRef<[f64]>],
    leader_heading_next: f64,
    step_length: f64,
) -> SwarmState {
    let leader = state.leader();
    let mut headings = Vec::with_capacity(state.agents());
    for row in rows.iter().take(leader) {
        let row = row.as_ref();
        headings.push(row.iter().zip(&state.headings).map(|(w, x)| w * x).sum());
    }
    headings.push(leader_heading_next);
    let positions = state
        .positions
        .iter()
        .zip(&headings)
        .map(|(&p, &h)| kinematics_step(p, h, step_length))
        .collect();
    SwarmState {
        headings,
        positions,
        t: state.t + 1,
    }
}

/// Simulates `leader_headings.len()` steps from `initial`.
pub fn rollout(
    initial: &SwarmState,
    weights: &WeightMatrix,
    leader_headings: &[f64],
    step_length: f64,
) -> Result<SwarmTrajectory, SwarmError> {
    if weights.agents() != initial.agents() {
        return Err(SwarmError::Dimension {
            expected: initial.agents(),
            found: weights.agents(),
            what: "weight matrix agents",
        });
    }
    if !(step_length > 0.0) {
        return Err(SwarmError::InvalidStepLength(step_length));
    }
    Ok(rollout_raw(
        initial,
        weights.rows(),
        leader_headings,
        step_length,
    ))
}

pub(crate) fn rollout_raw(
    initial: &SwarmState,
    rows: &[impl AsRef<[f64]>],
    leader_headings: &[f64],
    step_length: f64,
) -> SwarmTrajectory {
    let mut states = Vec::with_capacity(leader_headings.len() + 1);
    let mut start = initial.clone();
    start.t = 0;
    states.push(start);
    for &h in leader_headings {
        let next = advance(states.last().unwrap(), rows, h, step_length);
        states.push(next);
    }
    SwarmTrajectory {
        states,
        step_length,
    }
}
