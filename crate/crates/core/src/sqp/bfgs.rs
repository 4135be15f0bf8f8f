use nalgebra::{DMatrix, DVector};

/// Damped BFGS update of the Lagrangian Hessian approximation.
///
/// `s` is the step, `y` the change in the Lagrangian gradient. When
/// `sᵀy < damping · sᵀBs`, `y` is replaced by `θy + (1-θ)Bs` so that the
/// curvature condition holds and `B` stays positive definite. Steps shorter
/// than `min_step` leave `B` unchanged.
pub fn bfgs_update(
    b: &DMatrix<f64>,
    s: &DVector<f64>,
    y: &DVector<f64>,
    damping: f64,
    min_step: f64,
) -> DMatrix<f64> {
    if s.amax() < min_step || !s.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return b.clone();
    }
    let bs = b * s;
    let sbs = s.dot(&bs);
    if sbs <= 0.0 {
        return b.clone();
    }
    let sy = s.dot(y);
    let r = if sy >= damping * sbs {
        y.clone()
    } else {
        let theta = (1.0 - damping) * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if sr <= 0.0 {
        return b.clone();
    }
    let mut next = b - (&bs * bs.transpose()) / sbs + (&r * r.transpose()) / sr;
    // keep exact symmetry against rounding drift
    let t = next.transpose();
    next += t;
    next *= 0.5;
    next
}
