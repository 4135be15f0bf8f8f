//! The swarm design problem, its starting points, multistart and the
//! utopia-point solves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::solver::{
    sqp_minimize, NlpProblem, NlpValues, SolveReport, SolverConfig, SqpError, Status,
};
use crate::constraints::{equality_residuals, spacing_per_step, ConstraintSet, SwarmModel};
use crate::objectives::{
    consensus_rss, explored_area_smooth, pseudo_objectives, scalarize, GridSpec, ObjectiveWeights,
    Phi1Variant, SmoothingParams, UtopiaPoints,
};
use crate::scenario::ScenarioConfig;
use crate::swarm::{metropolis_weights, AgentGraph};

/// Which scalar the solver minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// `-f1` (smoothed), i.e. maximize explored area.
    ExploreOnly,
    /// `f2`.
    ConsensusOnly,
    /// `a1 φ1 + a2 φ2` with smoothed `f1`.
    Weighted {
        utopia: UtopiaPoints,
        weights: ObjectiveWeights,
        variant: Phi1Variant,
    },
}

/// Design problem over the weights and leader headings: row sums and the
/// final leader position as equalities, spacing at every step as
/// inequalities, weights in `[lower_bound, 1]`, headings in `[-π, π]`.
#[derive(Debug, Clone)]
pub struct SwarmProblem {
    pub model: SwarmModel,
    pub constraints: ConstraintSet,
    pub grid: GridSpec,
    pub smoothing: SmoothingParams,
    pub weight_lower_bound: f64,
    pub objective: ObjectiveKind,
}

impl SwarmProblem {
    pub fn new(cfg: &ScenarioConfig, objective: ObjectiveKind) -> Self {
        Self {
            model: cfg.model(),
            constraints: cfg.constraint_set(),
            grid: cfg.grid(),
            smoothing: cfg.smoothing,
            weight_lower_bound: cfg.weight_lower_bound,
            objective,
        }
    }

    /// Smoothed `f1` and `f2` of design `y`.
    pub fn raw_objectives(&self, y: &[f64]) -> (f64, f64) {
        let traj = self.model.rollout_values(y);
        (
            explored_area_smooth(&traj, &self.grid, &self.smoothing),
            consensus_rss(&traj),
        )
    }

    /// Whether `v` meets the scenario tolerances.
    pub fn is_feasible(&self, v: &NlpValues) -> bool {
        v.equalities
            .iter()
            .all(|c| c.abs() <= self.constraints.tol_eq)
            && v.inequalities
                .iter()
                .all(|c| *c <= self.constraints.tol_ineq)
    }
}

impl NlpProblem for SwarmProblem {
    fn dimension(&self) -> usize {
        self.model.layout.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let l = self.model.layout;
        let mut lo = vec![self.weight_lower_bound; l.weight_count()];
        let mut hi = vec![1.0; l.weight_count()];
        lo.extend(std::iter::repeat_n(-std::f64::consts::PI, l.steps));
        hi.extend(std::iter::repeat_n(std::f64::consts::PI, l.steps));
        (lo, hi)
    }

    fn evaluate(&self, y: &[f64]) -> NlpValues {
        let traj = self.model.rollout_values(y);
        let objective = match self.objective {
            ObjectiveKind::ExploreOnly => -explored_area_smooth(&traj, &self.grid, &self.smoothing),
            ObjectiveKind::ConsensusOnly => consensus_rss(&traj),
            ObjectiveKind::Weighted {
                utopia,
                weights,
                variant,
            } => {
                let f1 = if weights.a1 > 0.0 {
                    explored_area_smooth(&traj, &self.grid, &self.smoothing)
                } else {
                    0.0
                };
                let f2 = consensus_rss(&traj);
                let (p1, p2) =
                    pseudo_objectives(f1, f2, &utopia, self.smoothing.epsilon_guard, variant);
                let p1 = if weights.a1 > 0.0 { p1 } else { 0.0 };
                scalarize(p1, p2, &weights)
            }
        };
        NlpValues {
            objective,
            equalities: equality_residuals(y, self.model.layout, &traj, &self.constraints),
            inequalities: spacing_per_step(&traj, &self.constraints),
        }
    }
}

/// Uniform weights and the nominal leader headings: straight ahead when the
/// target lies dead ahead at full reach, otherwise a symmetric sweep that
/// ends exactly on the target.
pub fn canonical_start(cfg: &ScenarioConfig) -> Vec<f64> {
    let m = cfg.agents();
    let mut y = vec![1.0 / m as f64; m * m];
    y.extend(nominal_headings(cfg));
    y
}

/// Leader headings `ψ + δ u_t` with `u` running linearly from 1 to -1, `ψ`
/// the bearing of the target and `δ` chosen so that the path length along
/// the bearing equals the target distance.
pub fn nominal_headings(cfg: &ScenarioConfig) -> Vec<f64> {
    let t = cfg.steps;
    let start = cfg.formation.positions[cfg.agents() - 1];
    let (dx, dy) = (cfg.target[0] - start[0], cfg.target[1] - start[1]);
    let reach = t as f64 * cfg.step_length;
    if dx == 0.0 && dy == reach {
        return vec![0.0; t];
    }
    let psi = dx.atan2(dy);
    let u: Vec<f64> = (0..t)
        .map(|k| {
            if t == 1 {
                0.0
            } else {
                1.0 - 2.0 * k as f64 / (t - 1) as f64
            }
        })
        .collect();
    let along = |delta: f64| cfg.step_length * u.iter().map(|v| (delta * v).cos()).sum::<f64>();
    let dist = dx.hypot(dy);
    // along() falls monotonically on [0, π/2] for |u| <= 1
    let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
    if along(hi) > dist {
        hi = std::f64::consts::PI;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if along(mid) > dist {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    u.iter().map(|v| psi + delta * v).collect()
}

/// The canonical start followed by `count - 1` seeded perturbations: each
/// weight row redrawn as `lb + (1 - m·lb)·Dirichlet(1)`, headings jittered
/// uniformly within ±15°.
pub fn starting_points(cfg: &ScenarioConfig, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = canonical_start(cfg);
    let m = cfg.agents();
    let lb = cfg.weight_lower_bound;
    let jitter = 15f64.to_radians();
    let mut out = vec![base.clone()];
    for k in 1..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut y = base.clone();
        for row in y[..m * m].chunks_mut(m) {
            let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = e.iter().sum();
            for (w, ei) in row.iter_mut().zip(&e) {
                *w = lb + (1.0 - m as f64 * lb) * ei / total;
            }
        }
        for h in &mut y[m * m..] {
            *h += rng.random_range(-jitter..=jitter);
        }
        out.push(y);
    }
    out
}

/// Outcome of one start of a multistart run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub status: Status,
    pub objective: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub func_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartReport {
    pub best: SolveReport,
    pub best_index: usize,
    pub starts: Vec<StartSummary>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultistartError {
    #[error(transparent)]
    Solver(#[from] SqpError),
    #[error("no start reached a feasible point ({})", summarize(.starts))]
    AllInfeasible {
        /// The least infeasible run.
        closest: Box<SolveReport>,
        starts: Vec<StartSummary>,
    },
}

fn summarize(starts: &[StartSummary]) -> String {
    starts
        .iter()
        .map(|s| {
            format!(
                "start {}: {:?}, violation {:.3e}",
                s.index, s.status, s.max_violation
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Runs [`sqp_minimize`] from every start in parallel and keeps the best
/// feasible result: lowest objective, then fewest evaluations, then lowest
/// start index.
pub fn multistart(
    problem: &SwarmProblem,
    starts: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<MultistartReport, MultistartError> {
    let reports: Vec<Result<SolveReport, SqpError>> = starts
        .par_iter()
        .map(|y0| sqp_minimize(problem, y0, cfg))
        .collect();
    let reports: Vec<SolveReport> = reports.into_iter().collect::<Result<_, _>>()?;
    let summaries: Vec<StartSummary> = reports
        .iter()
        .enumerate()
        .map(|(index, r)| StartSummary {
            index,
            status: r.status,
            objective: r.objective,
            max_violation: r.max_violation,
            feasible: problem.is_feasible(&NlpValues {
                objective: r.objective,
                equalities: r.equalities.clone(),
                inequalities: r.inequalities.clone(),
            }),
            func_evals: r.func_evals,
        })
        .collect();
    let best = summaries
        .iter()
        .filter(|s| s.feasible)
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(a.func_evals.cmp(&b.func_evals))
                .then(a.index.cmp(&b.index))
        })
        .map(|s| s.index);
    match best {
        Some(i) => Ok(MultistartReport {
            best: reports[i].clone(),
            best_index: i,
            starts: summaries,
        }),
        None => {
            let closest = summaries
                .iter()
                .min_by(|a, b| {
                    a.max_violation
                        .total_cmp(&b.max_violation)
                        .then(a.index.cmp(&b.index))
                })
                .map(|s| s.index)
                .unwrap_or(0);
            Err(MultistartError::AllInfeasible {
                closest: Box::new(
                    reports
                        .into_iter()
                        .nth(closest)
                        .expect("at least one start"),
                ),
                starts: summaries,
            })
        }
    }
}

/// One single-objective utopia solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtopiaSolve {
    /// Best objective value in natural orientation (area for f1, RSS for f2).
    pub value: f64,
    pub feasible: bool,
    pub report: SolveReport,
    pub starts: Vec<StartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtopiaReport {
    /// Values fed to the joint solve.
    pub points: UtopiaPoints,
    pub explore: Option<UtopiaSolve>,
    pub consensus: Option<UtopiaSolve>,
    /// f2 of the Metropolis-weight rollout along the nominal headings.
    pub metropolis_f2: f64,
    pub notices: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtopiaError {
    #[error("utopia solve failed: {0}")]
    Solver(#[from] SqpError),
    #[error("utopia values unusable: f_min1={f_min1}, f_min2={f_min2}")]
    Invalid { f_min1: f64, f_min2: f64 },
}

/// f2 of the rollout that uses Metropolis weights on the complete
/// leader-follower graph and the nominal leader headings.
pub fn metropolis_consensus(cfg: &ScenarioConfig) -> f64 {
    let m = cfg.agents();
    let graph = AgentGraph::leader_follower(m);
    let w =
        metropolis_weights(&graph, &graph.symmetrized().degrees()).expect("degrees match graph");
    let mut y: Vec<f64> = w.matrix.iter().flatten().copied().collect();
    y.extend(nominal_headings(cfg));
    consensus_rss(&cfg.model().rollout_values(&y))
}

/// Optimizes each objective alone under the full constraint set. An
/// objective with zero weight is skipped and gets placeholder utopia value 1.
pub fn compute_utopia(
    cfg: &ScenarioConfig,
    solver: &SolverConfig,
) -> Result<UtopiaReport, UtopiaError> {
    let starts = starting_points(cfg, solver.multistart_count, solver.rng_seed);
    let mut notices = Vec::new();
    let solve = |kind: ObjectiveKind, negate: bool| -> Result<UtopiaSolve, UtopiaError> {
        let problem = SwarmProblem::new(cfg, kind);
        let (report, feasible, summaries) = match multistart(&problem, &starts, solver) {
            Ok(r) => (r.best, true, r.starts),
            Err(MultistartError::AllInfeasible { closest, starts }) => (*closest, false, starts),
            Err(MultistartError::Solver(e)) => return Err(e.into()),
        };
        let value = if negate {
            -report.objective
        } else {
            report.objective
        };
        Ok(UtopiaSolve {
            value,
            feasible,
            report,
            starts: summaries,
        })
    };

    let explore = if cfg.a1 > 0.0 {
        let s = solve(ObjectiveKind::ExploreOnly, true)?;
        if !s.feasible {
            notices.push(
                "explored-area utopia solve found no feasible point; using its best attempt".into(),
            );
        }
        Some(s)
    } else {
        notices.push("a1 = 0: explored-area utopia skipped".into());
        None
    };
    let metropolis_f2 = metropolis_consensus(cfg);
    let consensus = if cfg.a2 > 0.0 {
        let s = solve(ObjectiveKind::ConsensusOnly, false)?;
        if !s.feasible {
            notices.push(
                "consensus utopia solve found no feasible point; using its best attempt".into(),
            );
        }
        Some(s)
    } else {
        notices.push("a2 = 0: consensus utopia skipped".into());
        None
    };

    let f_min1 = explore.as_ref().map_or(1.0, |s| s.value);
    let f_min2 = match (cfg.consensus_utopia, &consensus) {
        (_, None) => 1.0,
        (crate::scenario::ConsensusUtopia::Metropolis, Some(_)) => metropolis_f2,
        (crate::scenario::ConsensusUtopia::Solver, Some(s)) => s.value,
    };
    let points =
        UtopiaPoints::new(f_min1, f_min2).map_err(|_| UtopiaError::Invalid { f_min1, f_min2 })?;
    Ok(UtopiaReport {
        points,
        explore,
        consensus,
        metropolis_f2,
        notices,
    })
}
