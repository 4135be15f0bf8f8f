//! Equality and spacing constraints over the design vector.

mod design;
mod jacobian;

pub use design::{DesignLayout, DesignRole, DesignVector};
pub use jacobian::jacobian_fd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::swarm::{rollout_raw, SwarmState, SwarmTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("design vector has length {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite residual {residual} while perturbing design index {index}")]
    NonFinite { index: usize, residual: usize },
    #[error("invalid constraint set: {0}")]
    Invalid(String),
}

/// Fixed physical setup the design vector is rolled out against.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmModel {
    pub initial: SwarmState,
    pub step_length: f64,
    pub layout: DesignLayout,
}

impl SwarmModel {
    pub fn new(initial: SwarmState, step_length: f64, steps: usize) -> Self {
        let layout = DesignLayout::new(initial.agents(), steps);
        Self {
            initial,
            step_length,
            layout,
        }
    }

    pub fn check(&self, y: &DesignVector) -> Result<(), ConstraintError> {
        if y.layout != self.layout || y.values.len() != self.layout.len() {
            return Err(ConstraintError::Dimension {
                expected: self.layout.len(),
                found: y.values.len(),
            });
        }
        Ok(())
    }

    /// Trajectory implied by `y`. Only the cooperative weight rows enter the
    /// dynamics; rows need not be stochastic.
    pub fn rollout(&self, y: &DesignVector) -> Result<SwarmTrajectory, ConstraintError> {
        self.check(y)?;
        Ok(self.rollout_values(&y.values))
    }

    pub(crate) fn rollout_values(&self, values: &[f64]) -> SwarmTrajectory {
        let m = self.layout.agents;
        let rows: Vec<&[f64]> = values[..m * m].chunks(m).collect();
        let headings = &values[m * m..];
        rollout_raw(&self.initial, &rows[..m - 1], headings, self.step_length)
    }
}

/// Spacing tolerances, target and the feasibility thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub min_tol: f64,
    pub max_tol: f64,
    pub target: [f64; 2],
    pub tol_eq: f64,
    pub tol_ineq: f64,
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if !(self.min_tol > 0.0 && self.min_tol < self.max_tol) {
            return Err(ConstraintError::Invalid(format!(
                "need 0 < min_tol < max_tol, got {} and {}",
                self.min_tol, self.max_tol
            )));
        }
        if !(self.tol_eq > 0.0 && self.tol_ineq > 0.0) {
            return Err(ConstraintError::Invalid(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn equality_count(agents: usize) -> usize {
        agents + 2
    }

    /// Aggregated spacing rows: two bounds × two axes × followers.
    pub fn inequality_count(agents: usize) -> usize {
        4 * (agents - 1)
    }
}

/// `[row sums - 1 for every row..., X_leader(T) - X_target, Y_leader(T) - Y_target]`.
pub fn eval_equalities(
    y: &DesignVector,
    model: &SwarmModel,
    cs: &ConstraintSet,
) -> Result<Vec<f64>, ConstraintError> {
    let traj = model.rollout(y)?;
    Ok(equality_residuals(&y.values, model.layout, &traj, cs))
}

/// Aggregated spacing residuals: for each bound (min, max), axis (X, Y) and
/// follower, the worst value over `t = 1..=T` of the squared-form residual.
pub fn eval_inequalities(
    y: &DesignVector,
    model: &SwarmModel,
    cs: &ConstraintSet,
) -> Result<Vec<f64>, ConstraintError> {
    let traj = model.rollout(y)?;
    Ok(aggregate_spacing(
        &spacing_per_step(&traj, cs),
        traj.steps(),
    ))
}

pub(crate) fn equality_residuals(
    values: &[f64],
    layout: DesignLayout,
    traj: &SwarmTrajectory,
    cs: &ConstraintSet,
) -> Vec<f64> {
    let m = layout.agents;
    let mut out: Vec<f64> = values[..m * m]
        .chunks(m)
        .map(|r| r.iter().sum::<f64>() - 1.0)
        .collect();
    let last = traj.final_state();
    let p = last.positions[last.leader()];
    out.push(p[0] - cs.target[0]);
    out.push(p[1] - cs.target[1]);
    out
}

/// Per-step spacing residuals `minTol² - d²` and `d² - maxTol²`, ordered by
/// bound, axis, follower, then `t = 1..=T`.
pub fn spacing_per_step(traj: &SwarmTrajectory, cs: &ConstraintSet) -> Vec<f64> {
    let followers = traj.agents().saturating_sub(1);
    let steps = traj.steps();
    let mut out = Vec::with_capacity(4 * followers * steps);
    let (lo2, hi2) = (cs.min_tol * cs.min_tol, cs.max_tol * cs.max_tol);
    for bound in 0..2 {
        for axis in 0..2 {
            for i in 0..followers {
                for s in &traj.states[1..] {
                    let d = s.positions[i][axis] - s.positions[s.leader()][axis];
                    let d2 = d * d;
                    out.push(if bound == 0 { lo2 - d2 } else { d2 - hi2 });
                }
            }
        }
    }
    out
}

pub fn aggregate_spacing(per_step: &[f64], steps: usize) -> Vec<f64> {
    if steps == 0 {
        return Vec::new();
    }
    per_step
        .chunks(steps)
        .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Outcome of the independent feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub equality_residuals: Vec<f64>,
    pub inequality_residuals: Vec<f64>,
    pub max_equality_violation: f64,
    pub max_inequality_violation: f64,
    pub violations: Vec<String>,
}

const EQ_NAMES: [&str; 2] = ["final X of leader", "final Y of leader"];

/// Feasible iff every equality residual is within `tol_eq` and every
/// aggregated spacing residual is at most `tol_ineq`.
pub fn check_feasibility(
    y: &DesignVector,
    model: &SwarmModel,
    cs: &ConstraintSet,
) -> Result<FeasibilityReport, ConstraintError> {
    let eq = eval_equalities(y, model, cs)?;
    let ineq = eval_inequalities(y, model, cs)?;
    let m = model.layout.agents;
    let mut violations = Vec::new();
    for (k, r) in eq.iter().enumerate() {
        if !(r.abs() <= cs.tol_eq) {
            let name = if k < m {
                format!("row {} weight sum", k + 1)
            } else {
                EQ_NAMES[k - m].to_string()
            };
            violations.push(format!("{name}: residual {r:e}"));
        }
    }
    let followers = m - 1;
    for (k, r) in ineq.iter().enumerate() {
        if !(*r <= cs.tol_ineq) {
            let bound = if k / (2 * followers) == 0 {
                "min"
            } else {
                "max"
            };
            let axis = if (k / followers).is_multiple_of(2) {
                "X"
            } else {
                "Y"
            };
            violations.push(format!(
                "{bound} spacing on {axis} for agent {}: residual {r:e}",
                k % followers + 1
            ));
        }
    }
    let max_eq = eq.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let max_in = ineq.iter().cloned().fold(0.0, f64::max);
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        equality_residuals: eq,
        inequality_residuals: ineq,
        max_equality_violation: max_eq,
        max_inequality_violation: max_in,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diamond() -> SwarmState {
        SwarmState::new(
            vec![0.0; 4],
            vec![[-1.0, 1.0], [1.0, 1.0], [0.0, 2.0], [0.0, 0.0]],
        )
        .unwrap()
    }

    fn cs(target: [f64; 2]) -> ConstraintSet {
        ConstraintSet {
            min_tol: 0.2,
            max_tol: 5.0,
            target,
            tol_eq: 1e-6,
            tol_ineq: 1e-8,
        }
    }

    fn uniform_design(headings: &[f64]) -> DesignVector {
        DesignVector::pack(&vec![vec![0.25; 4]; 4], headings).unwrap()
    }

    #[test]
    fn uniform_rows_have_zero_sum_residuals() {
        let model = SwarmModel::new(diamond(), 1.0, 5);
        let y = uniform_design(&[0.0; 5]);
        let eq = eval_equalities(&y, &model, &cs([0.0, 5.0])).unwrap();
        assert_eq!(eq.len(), 6);
        assert!(eq.iter().all(|&r| r.abs() < 1e-15), "{eq:?}");
    }

    #[test]
    fn sim_one_rows_have_zero_sum_residuals() {
        let model = SwarmModel::new(diamond(), 1.0, 3);
        let mut w = vec![vec![0.1, 0.1, 0.1, 0.7]; 3];
        w.push(vec![0.25; 4]);
        let y = DesignVector::pack(&w, &[0.0; 3]).unwrap();
        let eq = eval_equalities(&y, &model, &cs([0.0, 3.0])).unwrap();
        for r in &eq[..4] {
            assert!(r.abs() < 1e-15);
        }
    }

    #[test]
    fn straight_rollout_meets_straight_target() {
        let model = SwarmModel::new(diamond(), 1.0, 7);
        let eq = eval_equalities(&uniform_design(&[0.0; 7]), &model, &cs([0.0, 7.0])).unwrap();
        assert_eq!(&eq[4..], &[0.0, 0.0]);
    }

    #[test]
    fn aligned_follower_violates_min_spacing() {
        // agent 3 sits straight ahead of the leader: zero X separation
        let model = SwarmModel::new(diamond(), 1.0, 4);
        let g = eval_inequalities(&uniform_design(&[0.0; 4]), &model, &cs([0.0, 4.0])).unwrap();
        assert_eq!(g.len(), 12);
        assert!((g[2] - 0.04).abs() < 1e-15);
        // the other followers keep 1 unit of X and Y separation
        for k in [0, 1, 3, 4, 5] {
            assert!(g[k] < 0.0);
        }
        for r in &g[6..] {
            assert!(*r < 0.0);
        }
    }

    #[test]
    fn separation_at_max_tol_is_on_the_boundary() {
        let initial = SwarmState::new(
            vec![0.0; 4],
            vec![[-5.0, 1.0], [1.0, 1.0], [0.5, 2.0], [0.0, 0.0]],
        )
        .unwrap();
        let model = SwarmModel::new(initial, 1.0, 2);
        let g = eval_inequalities(&uniform_design(&[0.0; 2]), &model, &cs([0.0, 2.0])).unwrap();
        assert_eq!(g[6], 0.0);
    }

    #[test]
    fn wrong_layout_is_a_dimension_error() {
        let model = SwarmModel::new(diamond(), 1.0, 5);
        let y = uniform_design(&[0.0; 4]);
        assert!(matches!(
            eval_equalities(&y, &model, &cs([0.0, 5.0])),
            Err(ConstraintError::Dimension { .. })
        ));
    }

    #[test]
    fn feasibility_report_names_violations() {
        let model = SwarmModel::new(diamond(), 1.0, 4);
        let rep = check_feasibility(&uniform_design(&[0.0; 4]), &model, &cs([1.0, 4.0])).unwrap();
        assert!(!rep.feasible);
        assert!(rep.violations.iter().any(|v| v.contains("final X")));
        assert!(rep
            .violations
            .iter()
            .any(|v| v.contains("min spacing on X for agent 3")));
    }

    /// Squared spacing residuals describe the same feasible set as the
    /// absolute-value form `minTol - |d| <= 0`, `|d| - maxTol <= 0`.
    #[test]
    fn squared_and_absolute_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = cs([0.0, 0.0]);
        let followers = 3;
        for _ in 0..100_000 {
            let mut positions: Vec<[f64; 2]> = (0..3)
                .map(|_| [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)])
                .collect();
            // sprinkle exact boundary cases
            if rng.random_bool(0.1) {
                positions[0][0] = 0.2;
            }
            if rng.random_bool(0.1) {
                positions[1][1] = -5.0;
            }
            positions.push([0.0, 0.0]);
            let state = SwarmState {
                headings: vec![0.0; 4],
                positions: positions.clone(),
                t: 1,
            };
            let traj = SwarmTrajectory {
                states: vec![state.clone(), state],
                step_length: 1.0,
            };
            let squared = spacing_per_step(&traj, &c).iter().all(|&r| r <= 0.0);
            let absolute = positions[..followers].iter().all(|p| {
                (0..2).all(|a| {
                    let d = (p[a] - 0.0f64).abs();
                    c.min_tol - d <= 0.0 && d - c.max_tol <= 0.0
                })
            });
            assert_eq!(squared, absolute, "{positions:?}");
        }
    }
}
