use std::cell::{Cell, RefCell};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bfgs::bfgs_update;
use super::line_search::line_search;
use super::qp::{solve_qp_subproblem, QpSolution, QpSubproblem};
use crate::constraints::jacobian_fd;

/// Values of a smooth constrained problem at one point. Equalities are
/// driven to zero, inequalities to `<= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpValues {
    pub objective: f64,
    pub equalities: Vec<f64>,
    pub inequalities: Vec<f64>,
}

impl NlpValues {
    fn is_finite(&self) -> bool {
        self.objective.is_finite()
            && self
                .equalities
                .iter()
                .chain(&self.inequalities)
                .all(|v| v.is_finite())
    }

    /// `‖c_eq‖₁ + ‖max(0, c_in)‖₁`
    pub fn violation_l1(&self) -> f64 {
        self.equalities.iter().map(|c| c.abs()).sum::<f64>()
            + self.inequalities.iter().map(|c| c.max(0.0)).sum::<f64>()
    }

    pub fn violation_inf(&self) -> f64 {
        let eq = self.equalities.iter().map(|c| c.abs()).fold(0.0, f64::max);
        self.inequalities.iter().fold(eq, |a, c| a.max(*c))
    }
}

/// A minimization problem with simple bounds and general constraints.
pub trait NlpProblem: Sync {
    fn dimension(&self) -> usize;

    /// Lower and upper bounds; infinite entries are absent bounds.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dimension();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    fn evaluate(&self, y: &[f64]) -> NlpValues;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kkt_tol: f64,
    pub step_tol: f64,
    /// Constraint violation accepted at convergence.
    pub feas_tol: f64,
    pub max_iters: usize,
    pub max_func_evals: usize,
    pub bfgs_damping: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub fd_step: f64,
    pub multistart_count: usize,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            step_tol: 1e-10,
            feas_tol: 1e-9,
            max_iters: 600,
            max_func_evals: 40_000,
            bfgs_damping: 0.2,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            fd_step: 1e-6,
            multistart_count: 8,
            rng_seed: 42,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SqpError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let checks = [
            ("kkt_tol", pos(self.kkt_tol)),
            ("step_tol", pos(self.step_tol)),
            ("feas_tol", pos(self.feas_tol)),
            ("max_iters", self.max_iters > 0),
            ("max_func_evals", self.max_func_evals > 0),
            (
                "bfgs_damping",
                self.bfgs_damping > 0.0 && self.bfgs_damping < 1.0,
            ),
            ("armijo_c1", self.armijo_c1 > 0.0 && self.armijo_c1 < 0.5),
            (
                "backtrack_factor",
                self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0,
            ),
            ("max_backtracks", self.max_backtracks > 0),
            ("fd_step", pos(self.fd_step)),
            ("multistart_count", self.multistart_count > 0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(SqpError::InvalidConfig(format!("{name} out of range"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    MaxEvals,
    LineSearchFailure,
    QpFailure,
    NumericalError,
}

/// One accepted step of the merit function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritRecord {
    pub penalty: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub optimum: Vec<f64>,
    pub objective: f64,
    pub equalities: Vec<f64>,
    pub inequalities: Vec<f64>,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub status: Status,
    pub iterations: usize,
    pub func_evals: usize,
    /// Objective at the start and after every accepted step.
    pub objective_history: Vec<f64>,
    pub merit_history: Vec<MeritRecord>,
    pub kkt_history: Vec<f64>,
    /// Iterations whose QP had to relax the linearized constraints.
    pub relaxed_qps: usize,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// Why the run stopped, when not converged.
    pub message: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqpError {
    #[error("start has length {found}, problem dimension is {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("problem is not finite at the start point")]
    NonFiniteStart,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Minimizes `problem` from `y0` by SQP with damped BFGS, an ℓ1 merit
/// function and finite-difference derivatives.
///
/// The start is clamped into the bounds. Each call to
/// [`NlpProblem::evaluate`] counts as one function evaluation; a gradient
/// costs `2n`.
pub fn sqp_minimize<P: NlpProblem + ?Sized>(
    problem: &P,
    y0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport, SqpError> {
    cfg.validate()?;
    let started = Instant::now();
    let n = problem.dimension();
    if y0.len() != n {
        return Err(SqpError::Dimension {
            expected: n,
            found: y0.len(),
        });
    }
    let (lo, hi) = problem.bounds();
    let clamp = |v: &mut [f64]| {
        for (j, x) in v.iter_mut().enumerate() {
            *x = x.clamp(lo[j], hi[j]);
        }
    };
    let evals = Cell::new(0usize);
    let eval = |y: &[f64]| {
        evals.set(evals.get() + 1);
        problem.evaluate(y)
    };

    let mut y = y0.to_vec();
    clamp(&mut y);
    let mut cur = eval(&y);
    if !cur.is_finite() {
        return Err(SqpError::NonFiniteStart);
    }
    let scale = 1.0 / cur.objective.abs().max(1.0);
    let (neq, nin) = (cur.equalities.len(), cur.inequalities.len());
    let stacked = |y: &[f64]| {
        let v = eval(y);
        let mut out = Vec::with_capacity(1 + neq + nin);
        out.push(scale * v.objective);
        out.extend(v.equalities);
        out.extend(v.inequalities);
        out
    };
    let jacobian = |y: &[f64]| jacobian_fd(stacked, y, cfg.fd_step).ok();

    let mut report = SolveReport {
        optimum: Vec::new(),
        objective: cur.objective,
        equalities: Vec::new(),
        inequalities: Vec::new(),
        max_violation: 0.0,
        kkt_residual: f64::INFINITY,
        status: Status::MaxIters,
        iterations: 0,
        func_evals: 0,
        objective_history: vec![cur.objective],
        merit_history: Vec::new(),
        kkt_history: Vec::new(),
        relaxed_qps: 0,
        eq_multipliers: vec![0.0; neq],
        ineq_multipliers: vec![0.0; nin],
        message: None,
        wall_time: Duration::ZERO,
    };

    let finish = |mut report: SolveReport, y: Vec<f64>, cur: NlpValues, status: Status| {
        report.status = status;
        report.objective = cur.objective;
        report.max_violation = cur.violation_inf();
        report.equalities = cur.equalities;
        report.inequalities = cur.inequalities;
        report.optimum = y;
        report.func_evals = evals.get();
        report.wall_time = started.elapsed();
        report
    };

    if evals.get() + 2 * n > cfg.max_func_evals {
        return Ok(finish(report, y, cur, Status::MaxEvals));
    }
    let Some(mut jac) = jacobian(&y) else {
        return Ok(finish(report, y, cur, Status::NumericalError));
    };
    let identity = DMatrix::<f64>::identity(n, n);
    let mut hess = identity.clone();
    let mut fresh_hessian = true;
    let mut penalty = 0.0f64;

    let status = loop {
        if report.iterations >= cfg.max_iters {
            break Status::MaxIters;
        }
        if evals.get() >= cfg.max_func_evals {
            break Status::MaxEvals;
        }
        let qp = build_qp(&hess, &jac, &cur, &y, &lo, &hi, neq);
        let sol = match solve_qp_subproblem(&qp) {
            Ok(sol) => sol,
            Err(_) if !fresh_hessian => {
                hess = identity.clone();
                fresh_hessian = true;
                continue;
            }
            Err(e) => {
                report.message = Some(format!("QP subproblem: {e}"));
                break Status::QpFailure;
            }
        };
        report.iterations += 1;
        if sol.is_relaxed() {
            report.relaxed_qps += 1;
        }

        let kkt = kkt_residual(&qp, &sol, &cur);
        report.kkt_history.push(kkt);
        report.kkt_residual = kkt;
        if !sol.is_relaxed() {
            report.eq_multipliers = sol.eq_multipliers.iter().map(|l| l / scale).collect();
            report.ineq_multipliers = sol.ineq_multipliers.iter().map(|l| l / scale).collect();
        }
        let viol = cur.violation_inf();
        if viol <= cfg.feas_tol && (kkt <= cfg.kkt_tol || sol.step.amax() <= cfg.step_tol) {
            break Status::Converged;
        }
        if sol.step.amax() <= cfg.step_tol {
            break Status::LineSearchFailure;
        }

        // penalty large enough for the step to be an exact-penalty descent direction
        let d = &sol.step;
        let g = qp.gradient.clone();
        let lin_red = cur.violation_l1() - linearized_violation(&qp, d);
        if !sol.is_relaxed() {
            // decays toward the multiplier level so that stale large values do
            // not block progress once the iterates are feasible
            let lam = 1.1 * sol.eq_multipliers.amax().max(sol.ineq_multipliers.amax()) + 1e-8;
            penalty = if penalty > lam {
                lam.max(0.5 * (penalty + lam))
            } else {
                lam
            };
        }
        let model_cost = g.dot(d) + 0.5 * d.dot(&(&hess * d));
        if lin_red > 0.0 && viol > cfg.feas_tol {
            penalty = penalty.max(model_cost / (0.5 * lin_red));
        }
        let dir_deriv = g.dot(d) - penalty * lin_red;
        let merit = |v: &NlpValues| scale * v.objective + penalty * v.violation_l1();
        let merit0 = merit(&cur);

        let accepted = search_step(
            &eval, &merit, &qp, &sol, &y, &cur, merit0, dir_deriv, cfg, &clamp,
        );
        let Some((y_new, v_new)) = accepted else {
            if !fresh_hessian {
                hess = identity.clone();
                fresh_hessian = true;
                continue;
            }
            break Status::LineSearchFailure;
        };
        report.merit_history.push(MeritRecord {
            penalty,
            before: merit0,
            after: merit(&v_new),
        });
        report.objective_history.push(v_new.objective);

        if evals.get() + 2 * n > cfg.max_func_evals {
            y = y_new;
            cur = v_new;
            break Status::MaxEvals;
        }
        let Some(jac_new) = jacobian(&y_new) else {
            y = y_new;
            cur = v_new;
            break Status::NumericalError;
        };
        let s = DVector::from_iterator(n, y_new.iter().zip(&y).map(|(a, b)| a - b));
        let grad_lag = |j: &DMatrix<f64>| {
            let mut gl = j.row(0).transpose();
            gl += j.rows(1, neq).transpose() * &sol.eq_multipliers;
            gl += j.rows(1 + neq, nin).transpose() * &sol.ineq_multipliers;
            gl
        };
        let yg = grad_lag(&jac_new) - grad_lag(&jac);
        if fresh_hessian {
            let sy = s.dot(&yg);
            if sy > 0.0 {
                hess = &identity * (yg.dot(&yg) / sy);
            }
        }
        hess = bfgs_update(&hess, &s, &yg, cfg.bfgs_damping, cfg.step_tol);
        fresh_hessian = false;
        y = y_new;
        cur = v_new;
        jac = jac_new;
    };
    Ok(finish(report, y, cur, status))
}

fn build_qp(
    hess: &DMatrix<f64>,
    jac: &DMatrix<f64>,
    cur: &NlpValues,
    y: &[f64],
    lo: &[f64],
    hi: &[f64],
    neq: usize,
) -> QpSubproblem {
    let nin = cur.inequalities.len();
    QpSubproblem {
        hessian: hess.clone(),
        gradient: jac.row(0).transpose(),
        eq_jacobian: jac.rows(1, neq).into_owned(),
        eq_values: DVector::from_column_slice(&cur.equalities),
        ineq_jacobian: jac.rows(1 + neq, nin).into_owned(),
        ineq_values: DVector::from_column_slice(&cur.inequalities),
        lower: lo.iter().zip(y).map(|(l, v)| (l - v).min(0.0)).collect(),
        upper: hi.iter().zip(y).map(|(h, v)| (h - v).max(0.0)).collect(),
    }
}

/// KKT residual of the nonlinear problem at the current point, using the QP
/// multipliers.
fn kkt_residual(qp: &QpSubproblem, sol: &QpSolution, cur: &NlpValues) -> f64 {
    let mut station = qp.gradient.clone();
    station += qp.eq_jacobian.transpose() * &sol.eq_multipliers;
    station += qp.ineq_jacobian.transpose() * &sol.ineq_multipliers;
    station -= &sol.lower_multipliers;
    station += &sol.upper_multipliers;
    // bound distances are the negated QP step bounds
    let mut compl = 0.0f64;
    for j in 0..station.len() {
        if qp.lower[j].is_finite() {
            compl = compl.max((sol.lower_multipliers[j] * qp.lower[j]).abs());
        }
        if qp.upper[j].is_finite() {
            compl = compl.max((sol.upper_multipliers[j] * qp.upper[j]).abs());
        }
    }
    for (c, mu) in cur.inequalities.iter().zip(sol.ineq_multipliers.iter()) {
        compl = compl.max((c * mu).abs());
    }
    station.amax().max(cur.violation_inf()).max(compl)
}

fn linearized_violation(qp: &QpSubproblem, d: &DVector<f64>) -> f64 {
    let eq = &qp.eq_jacobian * d + &qp.eq_values;
    let ineq = &qp.ineq_jacobian * d + &qp.ineq_values;
    eq.iter().map(|c| c.abs()).sum::<f64>() + ineq.iter().map(|c| c.max(0.0)).sum::<f64>()
}

/// Full step, then a second-order correction, then backtracking.
#[allow(clippy::too_many_arguments)]
fn search_step<E, M, C>(
    eval: &E,
    merit: &M,
    qp: &QpSubproblem,
    sol: &QpSolution,
    y: &[f64],
    cur: &NlpValues,
    merit0: f64,
    dir_deriv: f64,
    cfg: &SolverConfig,
    clamp: &C,
) -> Option<(Vec<f64>, NlpValues)>
where
    E: Fn(&[f64]) -> NlpValues,
    M: Fn(&NlpValues) -> f64,
    C: Fn(&mut [f64]),
{
    if !(dir_deriv < 0.0) {
        return None;
    }
    let accept = |m: f64, alpha: f64| {
        m.is_finite() && m < merit0 && m <= merit0 + cfg.armijo_c1 * alpha * dir_deriv
    };
    let d = &sol.step;
    let mut full: Vec<f64> = y.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
    clamp(&mut full);
    let v_full = eval(&full);
    if accept(merit(&v_full), 1.0) {
        return Some((full, v_full));
    }
    if v_full.is_finite() {
        if let Some(corr) = second_order_correction(qp, sol, cur, &v_full) {
            let mut soc: Vec<f64> = full.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut soc);
            let v_soc = eval(&soc);
            if accept(merit(&v_soc), 1.0) {
                return Some((soc, v_soc));
            }
        }
    }
    let beta = cfg.backtrack_factor;
    let step: Vec<f64> = d.iter().map(|v| beta * v).collect();
    let last = RefCell::new(None);
    line_search(
        |trial| {
            let mut p = trial.to_vec();
            clamp(&mut p);
            let v = eval(&p);
            let m = merit(&v);
            *last.borrow_mut() = Some((p, v));
            m
        },
        y,
        &step,
        merit0,
        beta * dir_deriv,
        cfg.armijo_c1,
        beta,
        cfg.max_backtracks.saturating_sub(1),
    )?;
    last.into_inner()
}

/// Least-norm correction that removes the constraint curvature seen at the
/// full step, over equalities and inequalities active in the QP or violated
/// at the trial point.
fn second_order_correction(
    qp: &QpSubproblem,
    sol: &QpSolution,
    cur: &NlpValues,
    trial: &NlpValues,
) -> Option<DVector<f64>> {
    let n = qp.dimension();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..trial.equalities.len() {
        rows.push(qp.eq_jacobian.row(k).transpose());
        rhs.push(-trial.equalities[k]);
    }
    for k in 0..trial.inequalities.len() {
        if sol.ineq_multipliers[k] > 0.0 || trial.inequalities[k] > 0.0 {
            rows.push(qp.ineq_jacobian.row(k).transpose());
            rhs.push(-trial.inequalities[k]);
        }
    }
    if rows.is_empty() || cur.violation_inf() > 1e3 * trial.violation_inf().max(1e-300) {
        return None;
    }
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let gram = &a * a.transpose() + DMatrix::identity(rows.len(), rows.len()) * 1e-12;
    let w = gram.lu().solve(&DVector::from_vec(rhs))?;
    let corr = a.transpose() * w;
    corr.iter().all(|v| v.is_finite()).then_some(corr)
}
