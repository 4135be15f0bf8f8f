//! The `swarm-sqp` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::scenario::{
    builtin_names, builtin_scenarios, builtin_source, parse_headings_csv, parse_weights_csv,
    replay, resolve_scenario, run_scenario, write_rollout_artifacts, write_run_artifacts,
    write_utopia_artifacts, ResultBundle, RolloutSummary, RunError, ScenarioConfig, ScenarioError,
    UtopiaSummary,
};
use crate::sqp::{compute_utopia, SqpError, Status, UtopiaError, UtopiaSolve};
use crate::swarm::WeightMatrix;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Output could not be written.
    pub const IO: i32 = 1;
    /// Unreadable or invalid scenario, override, weights or headings.
    pub const INPUT: i32 = 2;
    /// The best solution found violates a constraint.
    pub const INFEASIBLE: i32 = 3;
    /// The iteration or function-evaluation budget ran out.
    pub const BUDGET: i32 = 4;
    /// Feasible but the solver stopped without converging.
    pub const NOT_CONVERGED: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(
    name = "swarm-sqp",
    version,
    about = "Optimize consensus weights and leader headings of a rover swarm"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Directory for the output artifacts.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    /// Seed of the multistart perturbations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override a scenario field, e.g. `solver.max_func_evals=5000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print errors only.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute utopia points, run the joint optimization and write artifacts.
    Optimize {
        /// Built-in scenario name or scenario file.
        scenario: String,
    },
    /// Simulate given weights and leader headings without optimizing.
    Rollout {
        scenario: String,
        /// CSV of cooperative weight rows.
        #[arg(long)]
        weights: PathBuf,
        /// CSV of leader headings in degrees, or a headings series.
        #[arg(long)]
        headings: PathBuf,
    },
    /// Compute the single-objective utopia values.
    Utopia { scenario: String },
    /// List the built-in scenarios, or print one of them.
    Scenarios { name: Option<String> },
    /// Parse and check a scenario without running it.
    Validate { scenario: String },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::INPUT
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    let c = &cli.common;
    match &cli.command {
        Command::Optimize { scenario } => optimize(scenario, c),
        Command::Rollout {
            scenario,
            weights,
            headings,
        } => rollout(scenario, weights, headings, c),
        Command::Utopia { scenario } => utopia(scenario, c),
        Command::Scenarios { name } => scenarios(name.as_deref()),
        Command::Validate { scenario } => validate(scenario, c),
    }
}

fn load(scenario: &str, c: &Common) -> Result<ScenarioConfig, ScenarioError> {
    let mut ov = c.overrides.clone();
    if let Some(seed) = c.seed {
        ov.push(format!("solver.rng_seed={seed}"));
    }
    resolve_scenario(scenario, &ov)
}

fn input_error(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    exit::INPUT
}

fn io_error(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    exit::IO
}

/// Exit code for a finished run.
pub fn run_exit_code(b: &ResultBundle) -> i32 {
    match (b.feasibility.feasible, b.solve.status) {
        (true, Status::Converged) => exit::OK,
        (_, Status::MaxEvals | Status::MaxIters) => exit::BUDGET,
        (false, _) => exit::INFEASIBLE,
        (true, _) => exit::NOT_CONVERGED,
    }
}

fn status_name(s: Status) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{s:?}"))
}

fn optimize(scenario: &str, c: &Common) -> i32 {
    let cfg = match load(scenario, c) {
        Ok(cfg) => cfg,
        Err(e) => return input_error(e),
    };
    let bundle = match run_scenario(&cfg) {
        Ok(b) => b,
        Err(RunError::Infeasible(b)) => *b,
        Err(RunError::Scenario(e)) => return input_error(e),
        Err(RunError::Solver(SqpError::InvalidConfig(m)))
        | Err(RunError::Utopia(UtopiaError::Solver(SqpError::InvalidConfig(m)))) => {
            return input_error(m)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return exit::NOT_CONVERGED;
        }
    };
    if let Err(e) = write_run_artifacts(&bundle, &c.out) {
        return io_error(e);
    }
    let o = &bundle.objectives;
    if !c.quiet {
        println!(
            "{}: {} {}, f1={:.4} f2={:.6} f={:.6}, iterations={} func_evals={}, wall={:.2}s",
            cfg.name,
            status_name(bundle.solve.status),
            if bundle.feasibility.feasible {
                "feasible"
            } else {
                "infeasible"
            },
            o.f1_exact,
            o.f2,
            o.f,
            bundle.solve.iterations,
            bundle.solve.func_evals,
            bundle.wall_time.as_secs_f64()
        );
    }
    for v in &bundle.feasibility.violations {
        eprintln!("violation: {v}");
    }
    run_exit_code(&bundle)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn rollout(scenario: &str, weights: &Path, headings: &Path, c: &Common) -> i32 {
    let loaded = load(scenario, c).and_then(|cfg| {
        let w = parse_weights_csv(&read(weights)?)?;
        let h = parse_headings_csv(&read(headings)?)?;
        Ok((cfg, w, h))
    });
    let (cfg, rows, leader_deg) = match loaded {
        Ok(v) => v,
        Err(e) => return input_error(e),
    };
    let m = cfg.agents();
    if rows.len() != m - 1 || rows.iter().any(|r| r.len() != m) {
        return input_error(format!(
            "weights must be {} rows of {m} entries for this formation",
            m - 1
        ));
    }
    if let Err(e) = WeightMatrix::with_lower_bound(rows.clone(), 0.0, cfg.tol_eq) {
        return input_error(e);
    }
    let traj = replay(&cfg, &rows, &leader_deg);
    let summary = RolloutSummary::new(&cfg, &rows, &traj);
    if let Err(e) = write_rollout_artifacts(&summary, &traj, &leader_deg, &c.out) {
        return io_error(e);
    }
    if !c.quiet {
        let p = summary.final_leader_position;
        println!(
            "{}: {} steps, leader ends at ({:.6}, {:.6}), f1={:.4} f2={:.6}",
            cfg.name, summary.steps, p[0], p[1], summary.f1_exact, summary.f2
        );
    }
    exit::OK
}

fn subproblem_line(name: &str, s: &UtopiaSolve) -> String {
    format!(
        "{name}: {:.6} ({}, {}, {} evals)",
        s.value,
        status_name(s.report.status),
        if s.feasible { "feasible" } else { "infeasible" },
        s.report.func_evals
    )
}

fn utopia(scenario: &str, c: &Common) -> i32 {
    let cfg = match load(scenario, c) {
        Ok(cfg) => cfg,
        Err(e) => return input_error(e),
    };
    let report = match compute_utopia(&cfg, &cfg.solver) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::NOT_CONVERGED;
        }
    };
    let summary = UtopiaSummary::new(&cfg, &report);
    if let Err(e) = write_utopia_artifacts(&summary, &c.out) {
        return io_error(e);
    }
    if !c.quiet {
        let mut parts = Vec::new();
        if let Some(s) = &report.explore {
            parts.push(subproblem_line("f_min1", s));
        }
        if let Some(s) = &report.consensus {
            parts.push(subproblem_line("f_min2", s));
        }
        parts.push(format!("f_min2 (metropolis): {:.6}", report.metropolis_f2));
        println!("{}: {}", cfg.name, parts.join("; "));
    }
    for n in &report.notices {
        eprintln!("notice: {n}");
    }
    exit::OK
}

fn scenarios(name: Option<&str>) -> i32 {
    match name {
        Some(n) => match builtin_source(n) {
            Some(text) => {
                print!("{text}");
                exit::OK
            }
            None => input_error(format!(
                "no built-in scenario `{n}` (available: {})",
                builtin_names().collect::<Vec<_>>().join(", ")
            )),
        },
        None => {
            for (name, cfg) in builtin_scenarios() {
                println!(
                    "{name}\tT={} target=({}, {}) a1={} a2={} min_tol={} max_tol={}",
                    cfg.steps,
                    cfg.target[0],
                    cfg.target[1],
                    cfg.a1,
                    cfg.a2,
                    cfg.min_tol,
                    cfg.max_tol
                );
            }
            exit::OK
        }
    }
}

fn validate(scenario: &str, c: &Common) -> i32 {
    match load(scenario, c) {
        Ok(cfg) => {
            if !c.quiet {
                println!(
                    "{}: ok ({} agents, T={}, {} design variables)",
                    cfg.name,
                    cfg.agents(),
                    cfg.steps,
                    cfg.model().layout.len()
                );
            }
            exit::OK
        }
        Err(e) => input_error(e),
    }
}
