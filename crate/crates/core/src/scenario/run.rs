use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{RunError, ScenarioConfig};
use crate::constraints::{check_feasibility, DesignVector, FeasibilityReport};
use crate::objectives::{
    consensus_rss, explored_area_exact, explored_area_smooth, pseudo_objectives, scalarize,
    UtopiaPoints,
};
use crate::sqp::{
    compute_utopia, multistart, starting_points, MultistartError, ObjectiveKind, SolveReport,
    StartSummary, SwarmProblem, UtopiaReport,
};
use crate::swarm::{rollout_raw, SwarmTrajectory};

/// Objective values of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub f1_exact: f64,
    pub f1_smooth: f64,
    pub f2: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// The scalarized objective, built from the smoothed `f1` as in the solve.
    pub f: f64,
}

impl ObjectiveBreakdown {
    pub fn from_trajectory(
        traj: &SwarmTrajectory,
        cfg: &ScenarioConfig,
        utopia: &UtopiaPoints,
    ) -> Self {
        let grid = cfg.grid();
        let f1_exact = explored_area_exact(traj, &grid);
        let f1_smooth = explored_area_smooth(traj, &grid, &cfg.smoothing);
        let f2 = consensus_rss(traj);
        let (p1, phi2) = pseudo_objectives(
            f1_smooth,
            f2,
            utopia,
            cfg.smoothing.epsilon_guard,
            cfg.phi1_variant,
        );
        let phi1 = if cfg.a1 > 0.0 { p1 } else { 0.0 };
        Self {
            f1_exact,
            f1_smooth,
            f2,
            phi1,
            phi2,
            f: scalarize(phi1, phi2, &cfg.objective_weights()),
        }
    }
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config: ScenarioConfig,
    /// Cooperative weight rows; the leader row of the design does not enter
    /// the dynamics and is kept only in `design`.
    pub weights: Vec<Vec<f64>>,
    pub leader_headings_deg: Vec<f64>,
    /// Full design vector the trajectory is rolled out from.
    pub design: Vec<f64>,
    pub trajectory: SwarmTrajectory,
    pub objectives: ObjectiveBreakdown,
    pub utopia: UtopiaReport,
    pub solve: SolveReport,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
    pub feasibility: FeasibilityReport,
    #[serde(skip)]
    pub utopia_wall_time: Duration,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ResultBundle {
    /// Headings of every agent at `t = 0..=T`, in degrees.
    pub fn heading_table_deg(&self) -> Vec<Vec<f64>> {
        heading_table_deg(&self.trajectory)
    }

    /// Function evaluations over the utopia solves and every joint start.
    pub fn total_func_evals(&self) -> usize {
        let utopia: usize = [&self.utopia.explore, &self.utopia.consensus]
            .into_iter()
            .flatten()
            .flat_map(|s| s.starts.iter().map(|x| x.func_evals))
            .sum();
        utopia + self.starts.iter().map(|s| s.func_evals).sum::<usize>()
    }

    pub fn converged(&self) -> bool {
        self.solve.status == crate::sqp::Status::Converged
    }
}

pub fn heading_table_deg(traj: &SwarmTrajectory) -> Vec<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| s.headings.iter().map(|h| h.to_degrees()).collect())
        .collect()
}

/// Rolls out cooperative `weights` with leader headings given in degrees.
/// Artifacts and replays both go through here so that a replay of written
/// files reproduces the run exactly.
pub fn replay(
    cfg: &ScenarioConfig,
    weights: &[Vec<f64>],
    leader_headings_deg: &[f64],
) -> SwarmTrajectory {
    let headings: Vec<f64> = leader_headings_deg.iter().map(|d| d.to_radians()).collect();
    rollout_raw(&cfg.initial_state(), weights, &headings, cfg.step_length)
}

/// Computes the utopia points, runs the multistart joint solve, rolls out
/// the best start and checks it independently.
///
/// When no start is feasible the least infeasible one is returned inside
/// [`RunError::Infeasible`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ResultBundle, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let utopia = compute_utopia(cfg, &cfg.solver)?;
    let utopia_wall_time = started.elapsed();
    let problem = SwarmProblem::new(
        cfg,
        ObjectiveKind::Weighted {
            utopia: utopia.points,
            weights: cfg.objective_weights(),
            variant: cfg.phi1_variant,
        },
    );
    let starts = starting_points(cfg, cfg.solver.multistart_count, cfg.solver.rng_seed);
    let (solve, best_start, summaries) = match multistart(&problem, &starts, &cfg.solver) {
        Ok(r) => (r.best, r.best_index, r.starts),
        Err(MultistartError::AllInfeasible { closest, starts }) => {
            let idx = starts
                .iter()
                .position(|s| s.max_violation == closest.max_violation)
                .unwrap_or(0);
            (*closest, idx, starts)
        }
        Err(MultistartError::Solver(e)) => return Err(e.into()),
    };

    let m = cfg.agents();
    let y = &solve.optimum;
    let weights: Vec<Vec<f64>> = y[..m * m]
        .chunks(m)
        .take(m - 1)
        .map(<[f64]>::to_vec)
        .collect();
    let leader_headings_deg: Vec<f64> = y[m * m..].iter().map(|h| h.to_degrees()).collect();
    let trajectory = replay(cfg, &weights, &leader_headings_deg);
    let mut design = y[..m * m].to_vec();
    design.extend(leader_headings_deg.iter().map(|d| d.to_radians()));
    let model = cfg.model();
    let dv = DesignVector::from_values(design.clone(), model.layout)
        .map_err(|e| super::ScenarioError::Invalid(e.to_string()))?;
    let feasibility = check_feasibility(&dv, &model, &cfg.constraint_set())
        .map_err(|e| super::ScenarioError::Invalid(e.to_string()))?;
    let objectives = ObjectiveBreakdown::from_trajectory(&trajectory, cfg, &utopia.points);

    let bundle = ResultBundle {
        config: cfg.clone(),
        weights,
        leader_headings_deg,
        design,
        trajectory,
        objectives,
        utopia,
        solve,
        best_start,
        starts: summaries,
        feasibility,
        utopia_wall_time,
        wall_time: started.elapsed(),
    };
    if bundle.feasibility.feasible {
        Ok(bundle)
    } else {
        Err(RunError::Infeasible(Box::new(bundle)))
    }
}
