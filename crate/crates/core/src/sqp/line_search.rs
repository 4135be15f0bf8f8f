/// Result of a backtracking search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub scale: f64,
    pub merit: f64,
    pub trials: usize,
}

/// Backtracking Armijo search on `merit` along `step` from `y`.
///
/// Accepts the first `α = backtrack^k` with
/// `merit(y + α step) <= merit0 + c1 α dir_deriv` and a strict decrease.
/// Returns `None` after `max_trials` rejections or when `dir_deriv` is not a
/// descent slope.
pub fn line_search<M>(
    mut merit: M,
    y: &[f64],
    step: &[f64],
    merit0: f64,
    dir_deriv: f64,
    c1: f64,
    backtrack: f64,
    max_trials: usize,
) -> Option<LineSearchOutcome>
where
    M: FnMut(&[f64]) -> f64,
{
    if !(dir_deriv < 0.0) {
        return None;
    }
    let mut alpha = 1.0;
    let mut trial = vec![0.0; y.len()];
    for k in 0..max_trials {
        for ((t, yi), si) in trial.iter_mut().zip(y).zip(step) {
            *t = yi + alpha * si;
        }
        let m = merit(&trial);
        if m.is_finite() && m < merit0 && m <= merit0 + c1 * alpha * dir_deriv {
            return Some(LineSearchOutcome {
                scale: alpha,
                merit: m,
                trials: k + 1,
            });
        }
        alpha *= backtrack;
    }
    None
}
