//! Output files. Every artifact except `timing.json` depends only on the
//! scenario and seed, and numbers are written in Rust's shortest round-trip
//! form, which is locale independent.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    compare_weights, ObjectiveBreakdown, ResultBundle, ScenarioConfig, ScenarioError,
    StructuralDiffReport,
};
use crate::objectives::{consensus_rss, explored_area_exact};
use crate::sqp::{StartSummary, Status, UtopiaReport, UtopiaSolve};
use crate::swarm::SwarmTrajectory;

pub const HEADINGS_FILE: &str = "headings.csv";
pub const PATH_FILE: &str = "path.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    HeadingsSeries,
    PathSeries,
    WeightsMatrix,
    Summary,
    Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactFormat {
    DelimitedText,
    StructuredText,
}

/// One file written to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputArtifact {
    pub kind: ArtifactKind,
    pub format: ArtifactFormat,
    pub path: PathBuf,
}

fn csv_text(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// `time, agent1..agentM` with headings in degrees, one row per `t = 0..=T`.
/// The leader column for `t >= 1` is `leader_deg` verbatim, so parsing it
/// back yields exactly the commanded headings.
pub fn headings_csv(traj: &SwarmTrajectory, leader_deg: &[f64]) -> String {
    let m = traj.agents();
    let header = std::iter::once("time".to_string())
        .chain((1..=m).map(|i| format!("agent{i}")))
        .collect();
    csv_text(
        header,
        traj.states.iter().map(|s| {
            let mut row: Vec<String> = std::iter::once(s.t.to_string())
                .chain(s.headings.iter().map(|h| h.to_degrees().to_string()))
                .collect();
            if let Some(d) = s.t.checked_sub(1).and_then(|k| leader_deg.get(k)) {
                row[m] = d.to_string();
            }
            row
        }),
    )
}

/// `time, X1, Y1, ..., XM, YM`, one row per `t = 0..=T`.
pub fn path_csv(traj: &SwarmTrajectory) -> String {
    let m = traj.agents();
    let header = std::iter::once("time".to_string())
        .chain((1..=m).flat_map(|i| [format!("X{i}"), format!("Y{i}")]))
        .collect();
    csv_text(
        header,
        traj.states.iter().map(|s| {
            std::iter::once(s.t.to_string())
                .chain(
                    s.positions
                        .iter()
                        .flat_map(|p| [p[0].to_string(), p[1].to_string()]),
                )
                .collect()
        }),
    )
}

/// Cooperative weight rows under a `w1..wM` header.
pub fn weights_csv(rows: &[Vec<f64>]) -> String {
    let m = rows.first().map_or(0, Vec::len);
    csv_text(
        (1..=m).map(|j| format!("w{j}")).collect(),
        rows.iter().map(|r| r.iter().map(f64::to_string).collect()),
    )
}

fn numeric_records(text: &str, what: &str) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ScenarioError::Parse(format!("{what}: {e}")))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(ScenarioError::Parse(format!("{what} line {}: {e}", k + 1))),
        }
    }
    if out.is_empty() {
        return Err(ScenarioError::Parse(format!("{what}: no data rows")));
    }
    Ok(out)
}

/// Weight rows from CSV text; a non-numeric first line is taken as a header.
pub fn parse_weights_csv(text: &str) -> Result<Vec<Vec<f64>>, ScenarioError> {
    numeric_records(text, "weights")
}

/// Leader headings in degrees for `t = 1..=T`. Accepts either a single
/// column of headings or a headings series with a leading time column, in
/// which case the last column is the leader and the `t = 0` row is skipped.
pub fn parse_headings_csv(text: &str) -> Result<Vec<f64>, ScenarioError> {
    let recs = numeric_records(text, "headings")?;
    let width = recs[0].len();
    if recs.iter().any(|r| r.len() != width) {
        return Err(ScenarioError::Parse("headings: ragged rows".into()));
    }
    if width == 1 {
        return Ok(recs.into_iter().map(|r| r[0]).collect());
    }
    Ok(recs
        .into_iter()
        .filter(|r| r[0] != 0.0)
        .map(|r| r[width - 1])
        .collect())
}

/// Summary of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub status: Status,
    pub converged: bool,
    pub feasible: bool,
    pub objectives: ObjectiveBreakdown,
    pub f_min1: f64,
    pub f_min2: f64,
    pub f_min2_metropolis: f64,
    pub iterations: usize,
    pub func_evals: usize,
    pub total_func_evals: usize,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub relaxed_qps: usize,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
    pub weights: Vec<Vec<f64>>,
    pub leader_headings_deg: Vec<f64>,
    pub final_leader_position: [f64; 2],
    pub violations: Vec<String>,
    pub notices: Vec<String>,
    pub message: Option<String>,
    pub reference: Option<StructuralDiffReport>,
}

impl RunSummary {
    pub fn from_bundle(b: &ResultBundle) -> Self {
        let last = b.trajectory.final_state();
        let reference = b
            .config
            .reference_weights
            .as_ref()
            .and_then(|r| compare_weights(&b.weights, r, b.config.weight_lower_bound).ok());
        Self {
            scenario: b.config.name.clone(),
            seed: b.config.solver.rng_seed,
            status: b.solve.status,
            converged: b.converged(),
            feasible: b.feasibility.feasible,
            objectives: b.objectives,
            f_min1: b.utopia.points.f_min1,
            f_min2: b.utopia.points.f_min2,
            f_min2_metropolis: b.utopia.metropolis_f2,
            iterations: b.solve.iterations,
            func_evals: b.solve.func_evals,
            total_func_evals: b.total_func_evals(),
            kkt_residual: b.solve.kkt_residual,
            max_violation: b.solve.max_violation,
            relaxed_qps: b.solve.relaxed_qps,
            best_start: b.best_start,
            starts: b.starts.clone(),
            weights: b.weights.clone(),
            leader_headings_deg: b.leader_headings_deg.clone(),
            final_leader_position: last.positions[last.leader()],
            violations: b.feasibility.violations.clone(),
            notices: b.utopia.notices.clone(),
            message: b.solve.message.clone(),
            reference,
        }
    }
}

/// Status of one utopia subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSummary {
    pub value: f64,
    pub feasible: bool,
    pub status: Status,
    pub iterations: usize,
    pub func_evals: usize,
    pub kkt_residual: f64,
    pub max_violation: f64,
}

impl From<&UtopiaSolve> for SubproblemSummary {
    fn from(s: &UtopiaSolve) -> Self {
        Self {
            value: s.value,
            feasible: s.feasible,
            status: s.report.status,
            iterations: s.report.iterations,
            func_evals: s.report.func_evals,
            kkt_residual: s.report.kkt_residual,
            max_violation: s.report.max_violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtopiaSummary {
    pub scenario: String,
    pub seed: u64,
    /// Absent when the explored-area objective has zero weight.
    pub f_min1: Option<f64>,
    pub f_min2: Option<f64>,
    pub f_min2_metropolis: f64,
    pub explore: Option<SubproblemSummary>,
    pub consensus: Option<SubproblemSummary>,
    pub notices: Vec<String>,
}

impl UtopiaSummary {
    pub fn new(cfg: &ScenarioConfig, r: &UtopiaReport) -> Self {
        Self {
            scenario: cfg.name.clone(),
            seed: cfg.solver.rng_seed,
            f_min1: r.explore.as_ref().map(|s| s.value),
            f_min2: r.consensus.as_ref().map(|s| s.value),
            f_min2_metropolis: r.metropolis_f2,
            explore: r.explore.as_ref().map(Into::into),
            consensus: r.consensus.as_ref().map(Into::into),
            notices: r.notices.clone(),
        }
    }
}

/// Objective values and feasibility of a replayed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub scenario: String,
    pub steps: usize,
    pub f1_exact: f64,
    pub f2: f64,
    pub final_leader_position: [f64; 2],
    pub row_sums: Vec<f64>,
}

impl RolloutSummary {
    pub fn new(cfg: &ScenarioConfig, weights: &[Vec<f64>], traj: &SwarmTrajectory) -> Self {
        let last = traj.final_state();
        Self {
            scenario: cfg.name.clone(),
            steps: traj.steps(),
            f1_exact: explored_area_exact(traj, &cfg.grid()),
            f2: consensus_rss(traj),
            final_leader_position: last.positions[last.leader()],
            row_sums: weights.iter().map(|r| r.iter().sum()).collect(),
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    s
}

fn write(
    dir: &Path,
    name: &str,
    kind: ArtifactKind,
    body: &str,
) -> Result<OutputArtifact, ScenarioError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let format = match kind {
        ArtifactKind::Summary | ArtifactKind::Timing => ArtifactFormat::StructuredText,
        _ => ArtifactFormat::DelimitedText,
    };
    Ok(OutputArtifact { kind, format, path })
}

fn ensure_dir(dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct Timing {
    utopia_seconds: f64,
    best_start_seconds: f64,
    total_seconds: f64,
}

/// Writes headings, path, weights and summary, plus the wall-clock timings.
pub fn write_run_artifacts(
    b: &ResultBundle,
    dir: &Path,
) -> Result<Vec<OutputArtifact>, ScenarioError> {
    ensure_dir(dir)?;
    let timing = Timing {
        utopia_seconds: b.utopia_wall_time.as_secs_f64(),
        best_start_seconds: b.solve.wall_time.as_secs_f64(),
        total_seconds: b.wall_time.as_secs_f64(),
    };
    Ok(vec![
        write(
            dir,
            HEADINGS_FILE,
            ArtifactKind::HeadingsSeries,
            &headings_csv(&b.trajectory, &b.leader_headings_deg),
        )?,
        write(
            dir,
            PATH_FILE,
            ArtifactKind::PathSeries,
            &path_csv(&b.trajectory),
        )?,
        write(
            dir,
            WEIGHTS_FILE,
            ArtifactKind::WeightsMatrix,
            &weights_csv(&b.weights),
        )?,
        write(
            dir,
            SUMMARY_FILE,
            ArtifactKind::Summary,
            &to_json(&RunSummary::from_bundle(b)),
        )?,
        write(dir, TIMING_FILE, ArtifactKind::Timing, &to_json(&timing))?,
    ])
}

pub fn write_rollout_artifacts(
    summary: &RolloutSummary,
    traj: &SwarmTrajectory,
    leader_deg: &[f64],
    dir: &Path,
) -> Result<Vec<OutputArtifact>, ScenarioError> {
    ensure_dir(dir)?;
    Ok(vec![
        write(
            dir,
            HEADINGS_FILE,
            ArtifactKind::HeadingsSeries,
            &headings_csv(traj, leader_deg),
        )?,
        write(dir, PATH_FILE, ArtifactKind::PathSeries, &path_csv(traj))?,
        write(dir, SUMMARY_FILE, ArtifactKind::Summary, &to_json(summary))?,
    ])
}

pub fn write_utopia_artifacts(
    summary: &UtopiaSummary,
    dir: &Path,
) -> Result<Vec<OutputArtifact>, ScenarioError> {
    ensure_dir(dir)?;
    Ok(vec![write(
        dir,
        SUMMARY_FILE,
        ArtifactKind::Summary,
        &to_json(summary),
    )?])
}
