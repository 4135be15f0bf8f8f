//! Helpers shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swarm_sqp::sqp::QpSubproblem;

/// Enumerates every subset of inequality rows, solves the equality-constrained
/// KKT system and keeps the point that is primal feasible with non-negative
/// multipliers. For strictly convex objectives that point is the unique
/// minimizer.
pub fn enumerate(
    b: &DMatrix<f64>,
    g: &DVector<f64>,
    eq: &[(DVector<f64>, f64)],
    ineq: &[(DVector<f64>, f64)],
) -> Option<DVector<f64>> {
    let n = g.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << ineq.len()) {
        let active: Vec<&(DVector<f64>, f64)> = eq
            .iter()
            .chain(
                (0..ineq.len())
                    .filter(|k| mask & (1 << k) != 0)
                    .map(|k| &ineq[k]),
            )
            .collect();
        let m = active.len();
        if m > n {
            continue;
        }
        let mut k = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        k.view_mut((0, 0), (n, n)).copy_from(b);
        rhs.rows_mut(0, n).copy_from(&(-g));
        for (i, (a, c)) in active.iter().enumerate() {
            for j in 0..n {
                k[(n + i, j)] = a[j];
                k[(j, n + i)] = a[j];
            }
            rhs[n + i] = -c;
        }
        let Some(sol) = k.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let feasible = ineq.iter().all(|(a, c)| a.dot(&x) + c <= 1e-9);
        let dual_ok = (eq.len()..m).all(|i| sol[n + i] >= -1e-9);
        if feasible && dual_ok {
            let f = 0.5 * x.dot(&(b * &x)) + g.dot(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

pub fn random_instance(
    rng: &mut ChaCha8Rng,
    with_bounds: bool,
) -> (QpSubproblem, Vec<(DVector<f64>, f64)>) {
    let n = rng.random_range(2..=6);
    let m_eq = rng.random_range(0..=2.min(n - 1));
    let m_in = rng.random_range(1..=4);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let b = m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
    let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    // a known feasible point keeps every instance consistent
    let x0: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let a_eq = DMatrix::from_fn(m_eq, n, |_, _| rng.random_range(-1.0..1.0));
    let c_eq = -(&a_eq * &x0);
    let a_in = DMatrix::from_fn(m_in, n, |_, _| rng.random_range(-1.0..1.0));
    let slack = DVector::from_fn(m_in, |_, _| rng.random_range(0.0..1.0));
    let c_in = -(&a_in * &x0) - slack;
    let (lower, upper) = if with_bounds {
        (
            (0..n)
                .map(|j| x0[j].min(0.0) - rng.random_range(0.0..1.0))
                .collect(),
            (0..n)
                .map(|j| x0[j].max(0.0) + rng.random_range(0.0..1.0))
                .collect(),
        )
    } else {
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    };
    let mut rows: Vec<(DVector<f64>, f64)> = (0..m_in)
        .map(|k| (a_in.row(k).transpose(), c_in[k]))
        .collect();
    for j in 0..n {
        let mut e = DVector::zeros(n);
        if lower[j].is_finite() {
            e[j] = -1.0;
            rows.push((e.clone(), lower[j]));
        }
        if upper[j].is_finite() {
            e[j] = 1.0;
            rows.push((e, -upper[j]));
        }
    }
    let qp = QpSubproblem {
        hessian: b,
        gradient: g,
        eq_jacobian: a_eq,
        eq_values: c_eq,
        ineq_jacobian: a_in,
        ineq_values: c_in,
        lower,
        upper,
    };
    (qp, rows)
}
