use nalgebra::DMatrix;

use super::ConstraintError;

/// Central-difference Jacobian of `residuals` at `y`.
///
/// Column `k` perturbs `y[k]` by `±h·max(1, |y[k]|)`. Rows follow the
/// residual vector, columns the design vector.
pub fn jacobian_fd<F>(residuals: F, y: &[f64], h: f64) -> Result<DMatrix<f64>, ConstraintError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = y.to_vec();
    let mut jac: Option<DMatrix<f64>> = None;
    for k in 0..y.len() {
        let step = h * y[k].abs().max(1.0);
        probe[k] = y[k] + step;
        let plus = residuals(&probe);
        probe[k] = y[k] - step;
        let minus = residuals(&probe);
        probe[k] = y[k];
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(plus.len(), y.len()));
        // actual spacing of the perturbed points, which may differ from 2*step by rounding
        let width = (y[k] + step) - (y[k] - step);
        for (r, (p, m)) in plus.iter().zip(&minus).enumerate() {
            if !p.is_finite() || !m.is_finite() {
                return Err(ConstraintError::NonFinite {
                    index: k,
                    residual: r,
                });
            }
            jac[(r, k)] = (p - m) / width;
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(residuals(y).len(), 0)))
}
