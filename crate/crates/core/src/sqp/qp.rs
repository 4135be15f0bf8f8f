//! Dense primal active-set solver for the SQP subproblem
//!
//! ```text
//! min  ½ dᵀBd + gᵀd
//! s.t. A_eq d + b_eq  = 0
//!      A_in d + b_in <= 0
//!      lower <= d <= upper
//! ```
//!
//! The problem is always solved in relaxed form with one extra variable
//! `δ ∈ [0, 1]` scaling the constant terms of the equalities and of the
//! inequalities violated at `d = 0`, penalized by `ρδ + ½δ²`. The point
//! `(d, δ) = (0, 1)` is feasible, so no phase-one is needed. With `ρ` large
//! enough the optimum has `δ = 0` exactly whenever the linearization is
//! consistent; a positive `δ` signals an infeasible or badly conditioned
//! linearization.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("inconsistent QP dimensions: {0}")]
    Dimension(String),
    #[error("KKT system singular after {attempts} regularization attempts")]
    Singular { attempts: usize },
    #[error("active-set iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("bounds exclude the zero step")]
    BoundsExcludeZero,
}

#[derive(Debug, Clone)]
pub struct QpSubproblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub eq_jacobian: DMatrix<f64>,
    pub eq_values: DVector<f64>,
    pub ineq_jacobian: DMatrix<f64>,
    pub ineq_values: DVector<f64>,
    /// Per-component step bounds; infinite entries are absent bounds.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QpSubproblem {
    /// Unconstrained, unbounded subproblem.
    pub fn unconstrained(hessian: DMatrix<f64>, gradient: DVector<f64>) -> Self {
        let n = gradient.len();
        Self {
            hessian,
            gradient,
            eq_jacobian: DMatrix::zeros(0, n),
            eq_values: DVector::zeros(0),
            ineq_jacobian: DMatrix::zeros(0, n),
            ineq_values: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dimension(&self) -> usize {
        self.gradient.len()
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.dimension();
        let bad = |what: &str| Err(QpError::Dimension(what.to_string()));
        if self.hessian.shape() != (n, n) {
            return bad("hessian");
        }
        if self.eq_jacobian.ncols() != n || self.eq_jacobian.nrows() != self.eq_values.len() {
            return bad("equality block");
        }
        if self.ineq_jacobian.ncols() != n || self.ineq_jacobian.nrows() != self.ineq_values.len() {
            return bad("inequality block");
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bounds");
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| *l > 0.0 || *u < 0.0)
        {
            return Err(QpError::BoundsExcludeZero);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub step: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    /// Non-negative; zero for inequalities outside the final active set.
    pub ineq_multipliers: DVector<f64>,
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    /// Relaxation `δ`; zero unless the linearization was inconsistent.
    pub relaxation: f64,
    pub iterations: usize,
    /// Max of stationarity, primal violation and complementarity of the
    /// unrelaxed problem.
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn is_relaxed(&self) -> bool {
        self.relaxation > 0.0
    }
}

/// Solves `qp`; the relaxation stays at zero unless removing it would cost
/// more than a fixed multiple of the problem scale.
pub fn solve_qp_subproblem(qp: &QpSubproblem) -> Result<QpSolution, QpError> {
    qp.check()?;
    let scale = 1.0
        + qp.gradient.amax()
        + qp.hessian.amax()
        + qp.eq_values.amax().max(qp.ineq_values.amax());
    ActiveSet::new(qp, 1e4 * scale).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fixed {
    Free,
    Lower,
    Upper,
}

/// Working problem over `z = (d, δ)`: rows `G z = h` for equalities and
/// `G z <= h` for inequalities, plus simple bounds.
struct ActiveSet<'a> {
    qp: &'a QpSubproblem,
    n: usize,
    m_eq: usize,
    hess: DMatrix<f64>,
    lin: DVector<f64>,
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

const MAX_REGULARIZATIONS: usize = 3;

impl<'a> ActiveSet<'a> {
    fn new(qp: &'a QpSubproblem, penalty: f64) -> Self {
        let n = qp.dimension();
        let nz = n + 1;
        let m_eq = qp.eq_values.len();
        let m_in = qp.ineq_values.len();
        let mut hess = DMatrix::zeros(nz, nz);
        hess.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        hess[(n, n)] = 1.0;
        let mut lin = DVector::zeros(nz);
        lin.rows_mut(0, n).copy_from(&qp.gradient);
        lin[n] = penalty;

        let mut rows = DMatrix::zeros(m_eq + m_in, nz);
        let mut rhs = DVector::zeros(m_eq + m_in);
        for k in 0..m_eq {
            rows.view_mut((k, 0), (1, n))
                .copy_from(&qp.eq_jacobian.row(k));
            rows[(k, n)] = -qp.eq_values[k];
            rhs[k] = -qp.eq_values[k];
        }
        for k in 0..m_in {
            let r = m_eq + k;
            rows.view_mut((r, 0), (1, n))
                .copy_from(&qp.ineq_jacobian.row(k));
            let b = qp.ineq_values[k];
            rows[(r, n)] = if b > 0.0 { -b } else { 0.0 };
            rhs[r] = -b;
        }
        let mut lo = qp.lower.clone();
        let mut hi = qp.upper.clone();
        lo.push(0.0);
        hi.push(1.0);
        Self {
            qp,
            n,
            m_eq,
            hess,
            lin,
            rows,
            rhs,
            lo,
            hi,
        }
    }

    fn run(&self) -> Result<QpSolution, QpError> {
        let nz = self.n + 1;
        let total_rows = self.rows.nrows();
        let mut z = DVector::zeros(nz);
        z[self.n] = 1.0;
        let mut fixed = vec![Fixed::Free; nz];
        let mut working = self.independent_equalities();
        let limit = 50 * (nz + total_rows) + 100;
        let row_norms: Vec<f64> = (0..total_rows).map(|i| self.rows.row(i).norm()).collect();
        // set after an unblocked full step: z minimizes over the working set
        let mut subspace_min = false;

        for iter in 0..limit {
            let grad = &self.hess * &z + &self.lin;
            let (p, lambda) = match self.solve_eqp(&z, &grad, &fixed, &working) {
                Ok(sol) => sol,
                Err(e) => {
                    // roundoff can leave the working rows dependent over the
                    // free variables; keep an independent subset and retry
                    let kept = self.independent_rows(&working, &fixed, 1e-7);
                    if kept.len() == working.len() {
                        return Err(e);
                    }
                    working = kept;
                    self.solve_eqp(&z, &grad, &fixed, &working)?
                }
            };
            let zscale = 1.0 + z.amax();
            if subspace_min || p.amax() <= 1e-9 * zscale {
                subspace_min = false;
                // multipliers of fixed variables from full stationarity
                let mut resid = &grad + &self.hess * &p;
                for (slot, &row) in working.iter().enumerate() {
                    resid += self.rows.row(row).transpose() * lambda[slot];
                }
                let mut worst: Option<(f64, Drop)> = None;
                for (slot, &row) in working.iter().enumerate() {
                    if row >= self.m_eq {
                        let mu = lambda[slot];
                        if worst.as_ref().is_none_or(|w| mu < w.0) {
                            worst = Some((mu, Drop::Row(slot)));
                        }
                    }
                }
                for (j, f) in fixed.iter().enumerate() {
                    let nu = match f {
                        Fixed::Free => continue,
                        Fixed::Lower => resid[j],
                        Fixed::Upper => -resid[j],
                    };
                    if worst.as_ref().is_none_or(|w| nu < w.0) {
                        worst = Some((nu, Drop::Var(j)));
                    }
                }
                let mscale = 1e-10 * (1.0 + lambda.amax() + grad.amax());
                match worst {
                    Some((v, drop)) if v < -mscale => match drop {
                        Drop::Row(slot) => {
                            working.remove(slot);
                        }
                        Drop::Var(j) => fixed[j] = Fixed::Free,
                    },
                    _ => return Ok(self.finish(z, &fixed, &working, &lambda, &resid, iter + 1)),
                }
                continue;
            }

            let (step, block) = self.ratio_test(&z, &p, &fixed, &working, &row_norms);
            z.axpy(step, &p, 1.0);
            match block {
                Some(Block::Row(r)) => working.push(r),
                Some(Block::Var(j, at_lower)) => {
                    if at_lower {
                        z[j] = self.lo[j];
                        fixed[j] = Fixed::Lower;
                    } else {
                        z[j] = self.hi[j];
                        fixed[j] = Fixed::Upper;
                    }
                }
                None => subspace_min = true,
            }
        }
        Err(QpError::IterationLimit(limit))
    }

    /// Longest feasible fraction of `p` and the constraint that limits it.
    /// Rows numerically dependent on the working set are skipped: their
    /// products with an exact `p` vanish and only roundoff makes them block.
    fn ratio_test(
        &self,
        z: &DVector<f64>,
        p: &DVector<f64>,
        fixed: &[Fixed],
        working: &[usize],
        row_norms: &[f64],
    ) -> (f64, Option<Block>) {
        let nz = z.len();
        let total_rows = self.rows.nrows();
        let pnorm = p.norm();
        let mut skip: Vec<usize> = Vec::new();
        loop {
            let mut step = 1.0;
            let mut block = None;
            for r in self.m_eq..total_rows {
                if working.contains(&r) || skip.contains(&r) {
                    continue;
                }
                let ap = self.rows.row(r).dot(&p.transpose());
                if ap > 1e-9 * row_norms[r] * pnorm {
                    let slack = (self.rhs[r] - self.rows.row(r).dot(&z.transpose())).max(0.0);
                    let t = slack / ap;
                    if t < step {
                        step = t;
                        block = Some(Block::Row(r));
                    }
                }
            }
            for j in 0..nz {
                if fixed[j] != Fixed::Free || p[j] == 0.0 {
                    continue;
                }
                let t = if p[j] < 0.0 && self.lo[j].is_finite() {
                    (z[j] - self.lo[j]).max(0.0) / -p[j]
                } else if p[j] > 0.0 && self.hi[j].is_finite() {
                    (self.hi[j] - z[j]).max(0.0) / p[j]
                } else {
                    continue;
                };
                if t < step {
                    step = t;
                    block = Some(Block::Var(j, p[j] < 0.0));
                }
            }
            if let Some(Block::Row(r)) = block {
                let mut with = working.to_vec();
                with.push(r);
                if !self.independent_rows(&with, fixed, 1e-7).contains(&r) {
                    skip.push(r);
                    continue;
                }
            }
            return (step, block);
        }
    }

    /// Equality rows with a linearly independent subset kept; dependent rows
    /// stay satisfied along null-space steps.
    fn independent_equalities(&self) -> Vec<usize> {
        let all: Vec<usize> = (0..self.m_eq).collect();
        self.independent_rows(&all, &vec![Fixed::Free; self.n + 1], 1e-10)
    }

    /// Modified Gram-Schmidt over `rows` restricted to the free variables,
    /// keeping earlier rows first.
    fn independent_rows(&self, rows: &[usize], fixed: &[Fixed], tol: f64) -> Vec<usize> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut keep = Vec::new();
        for &k in rows {
            let mut v = self.rows.row(k).transpose();
            for (j, f) in fixed.iter().enumerate() {
                if *f != Fixed::Free {
                    v[j] = 0.0;
                }
            }
            let norm0 = v.norm();
            if norm0 == 0.0 {
                continue;
            }
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
            let norm = v.norm();
            if norm > tol * norm0 {
                basis.push(v / norm);
                keep.push(k);
            }
        }
        keep
    }

    /// Equality-constrained step over the free variables, steering the
    /// working rows back onto their right-hand sides.
    fn solve_eqp(
        &self,
        z: &DVector<f64>,
        grad: &DVector<f64>,
        fixed: &[Fixed],
        working: &[usize],
    ) -> Result<(DVector<f64>, DVector<f64>), QpError> {
        let free: Vec<usize> = (0..z.len()).filter(|&j| fixed[j] == Fixed::Free).collect();
        let nf = free.len();
        let w = working.len();
        let dim = nf + w;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.hess[(i, j)];
            }
            rhs[a] = -grad[i];
        }
        for (s, &r) in working.iter().enumerate() {
            for (a, &j) in free.iter().enumerate() {
                kkt[(nf + s, a)] = self.rows[(r, j)];
                kkt[(a, nf + s)] = self.rows[(r, j)];
            }
            rhs[nf + s] = self.rhs[r] - self.rows.row(r).dot(&z.transpose());
        }
        if dim == 0 {
            return Ok((DVector::zeros(z.len()), DVector::zeros(0)));
        }
        let hscale = 1.0 + self.hess.amax();
        for attempt in 0..=MAX_REGULARIZATIONS {
            let mut k = kkt.clone();
            if attempt > 0 {
                let reg = 1e-10 * hscale * 100f64.powi(attempt as i32);
                for a in 0..nf {
                    k[(a, a)] += reg;
                }
            }
            if let Some(x) = k.clone().lu().solve(&rhs) {
                let resid = (&k * &x - &rhs).amax();
                let tol = 1e-8 * (k.amax() * x.amax() + rhs.amax()).max(1e-300);
                if x.iter().all(|v| v.is_finite()) && resid <= tol {
                    let mut p = DVector::zeros(z.len());
                    for (a, &j) in free.iter().enumerate() {
                        p[j] = x[a];
                    }
                    let lambda = x.rows(nf, w).into_owned();
                    return Ok((p, lambda));
                }
            }
        }
        Err(QpError::Singular {
            attempts: MAX_REGULARIZATIONS,
        })
    }

    fn finish(
        &self,
        z: DVector<f64>,
        fixed: &[Fixed],
        working: &[usize],
        lambda: &DVector<f64>,
        resid: &DVector<f64>,
        iterations: usize,
    ) -> QpSolution {
        let n = self.n;
        let qp = self.qp;
        let m_in = qp.ineq_values.len();
        let mut eq = DVector::zeros(self.m_eq);
        let mut ineq = DVector::zeros(m_in);
        for (slot, &r) in working.iter().enumerate() {
            if r < self.m_eq {
                eq[r] = lambda[slot];
            } else {
                ineq[r - self.m_eq] = lambda[slot].max(0.0);
            }
        }
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        for j in 0..n {
            match fixed[j] {
                Fixed::Lower => lower[j] = resid[j].max(0.0),
                Fixed::Upper => upper[j] = (-resid[j]).max(0.0),
                Fixed::Free => {}
            }
        }
        let step = z.rows(0, n).into_owned();
        let relaxation = if z[n] > 1e-14 { z[n] } else { 0.0 };
        let mut sol = QpSolution {
            step,
            eq_multipliers: eq,
            ineq_multipliers: ineq,
            lower_multipliers: lower,
            upper_multipliers: upper,
            relaxation,
            iterations,
            kkt_residual: 0.0,
        };
        sol.kkt_residual = qp_kkt_residual(qp, &sol);
        sol
    }
}

enum Drop {
    Row(usize),
    Var(usize),
}

enum Block {
    Row(usize),
    Var(usize, bool),
}

/// KKT residual of `sol` for the unrelaxed subproblem.
pub fn qp_kkt_residual(qp: &QpSubproblem, sol: &QpSolution) -> f64 {
    let d = &sol.step;
    let mut station = &qp.hessian * d + &qp.gradient;
    station += qp.eq_jacobian.transpose() * &sol.eq_multipliers;
    station += qp.ineq_jacobian.transpose() * &sol.ineq_multipliers;
    station -= &sol.lower_multipliers;
    station += &sol.upper_multipliers;
    let mut worst = station.amax();
    let eq = &qp.eq_jacobian * d + &qp.eq_values;
    worst = worst.max(eq.amax());
    let ineq = &qp.ineq_jacobian * d + &qp.ineq_values;
    for (k, g) in ineq.iter().enumerate() {
        worst = worst
            .max(g.max(0.0))
            .max((sol.ineq_multipliers[k] * g).abs());
    }
    for j in 0..d.len() {
        worst = worst
            .max((qp.lower[j] - d[j]).max(0.0))
            .max((d[j] - qp.upper[j]).max(0.0));
        if qp.lower[j].is_finite() {
            worst = worst.max((sol.lower_multipliers[j] * (d[j] - qp.lower[j])).abs());
        }
        if qp.upper[j].is_finite() {
            worst = worst.max((sol.upper_multipliers[j] * (qp.upper[j] - d[j])).abs());
        }
    }
    worst
}
