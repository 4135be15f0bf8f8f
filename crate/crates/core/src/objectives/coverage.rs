use serde::{Deserialize, Serialize};

use super::{GridSpec, ObjectiveError};
use crate::swarm::SwarmTrajectory;

/// Sharpness of the differentiable coverage surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingParams {
    /// Log-sum-exp temperature of the soft bounding box, per length unit.
    pub bbox_temperature: f64,
    /// Width σ of the Gaussian cell-visit kernel, length units.
    pub coverage_width: f64,
    /// Denominator guard for the pseudo-objectives.
    pub epsilon_guard: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            bbox_temperature: 10.0,
            coverage_width: 0.5,
            epsilon_guard: 1e-8,
        }
    }
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.bbox_temperature) && ok(self.coverage_width) && ok(self.epsilon_guard) {
            Ok(())
        } else {
            Err(ObjectiveError::InvalidSmoothing(*self))
        }
    }
}

/// The three factors of the explored-area objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageBreakdown {
    pub width: f64,
    pub height: f64,
    pub cells: f64,
}

impl CoverageBreakdown {
    pub fn value(&self) -> f64 {
        self.width * self.height * self.cells
    }
}

/// Bounding box of all pooled positions times the number of grid cells that
/// contain at least one sampled position.
pub fn explored_area_exact(traj: &SwarmTrajectory, grid: &GridSpec) -> f64 {
    coverage_exact(traj, grid).value()
}

pub fn coverage_exact(traj: &SwarmTrajectory, grid: &GridSpec) -> CoverageBreakdown {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut visited = vec![false; grid.cells * grid.cells];
    let mut cells = 0usize;
    for p in traj.positions() {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
        if let Some((i, j)) = grid.cell_of(p) {
            let slot = &mut visited[i * grid.cells + j];
            if !*slot {
                *slot = true;
                cells += 1;
            }
        }
    }
    if cells == 0 && lo[0] > hi[0] {
        return CoverageBreakdown {
            width: 0.0,
            height: 0.0,
            cells: 0.0,
        };
    }
    CoverageBreakdown {
        width: hi[0] - lo[0],
        height: hi[1] - lo[1],
        cells: cells as f64,
    }
}

/// Differentiable surrogate of [`explored_area_exact`].
///
/// The box edges become log-sum-exp soft maxima/minima and each cell-visit
/// indicator becomes `1 - prod(1 - m)` over samples, where `m` is the
/// sample's Gaussian weight `exp(-d²/2σ²)` to the cell center, normalized
/// over all cells so that one sample's memberships sum to one.
pub fn explored_area_smooth(traj: &SwarmTrajectory, grid: &GridSpec, s: &SmoothingParams) -> f64 {
    coverage_smooth(traj, grid, s).value()
}

pub fn coverage_smooth(
    traj: &SwarmTrajectory,
    grid: &GridSpec,
    s: &SmoothingParams,
) -> CoverageBreakdown {
    let xs: Vec<f64> = traj.positions().map(|p| p[0]).collect();
    let ys: Vec<f64> = traj.positions().map(|p| p[1]).collect();
    let beta = s.bbox_temperature;
    let width = soft_max(&xs, beta) + soft_max_neg(&xs, beta);
    let height = soft_max(&ys, beta) + soft_max_neg(&ys, beta);

    let n = grid.cells;
    let mut miss = vec![1.0f64; n * n];
    let mut col = Vec::with_capacity(16);
    let mut row = Vec::with_capacity(16);
    for (&x, &y) in xs.iter().zip(&ys) {
        axis_membership(grid, 0, x, s.coverage_width, &mut col);
        axis_membership(grid, 1, y, s.coverage_width, &mut row);
        for &(i, mi) in &col {
            for &(j, mj) in &row {
                miss[i * n + j] *= 1.0 - mi * mj;
            }
        }
    }
    let cells = miss.iter().map(|m| 1.0 - m).sum();
    CoverageBreakdown {
        width,
        height,
        cells,
    }
}

/// Gaussian weights of `v` to the cell centers along one axis, normalized
/// over the cells so that they sum to one. Between two centers this is a
/// logistic in `v` with scale `sigma² / cell_size`.
fn axis_membership(grid: &GridSpec, axis: usize, v: f64, sigma: f64, out: &mut Vec<(usize, f64)>) {
    out.clear();
    if !v.is_finite() {
        return;
    }
    let h = grid.cell_size;
    let rel = (v - grid.origin[axis]) / h;
    // the containing (or closest edge) cell has the largest weight; weights
    // fall off on both sides with ratios that shrink by e^{-1/s²} per cell
    let nearest = (rel.floor().max(0.0) as usize).min(grid.cells - 1);
    let s2 = (sigma / h).powi(2);
    let shrink = (-1.0 / s2).exp();
    out.push((nearest, 1.0));
    let mut total = 1.0;
    let (mut w, mut ratio) = (1.0, ((rel - nearest as f64 - 1.0) / s2).exp());
    for k in nearest + 1..grid.cells {
        w *= ratio;
        ratio *= shrink;
        if w <= 1e-15 {
            break;
        }
        total += w;
        out.push((k, w));
    }
    let (mut w, mut ratio) = (1.0, (-(rel - nearest as f64) / s2).exp());
    for k in (0..nearest).rev() {
        w *= ratio;
        ratio *= shrink;
        if w <= 1e-15 {
            break;
        }
        total += w;
        out.push((k, w));
    }
    for (_, m) in out.iter_mut() {
        *m /= total;
    }
}

fn soft_max(v: &[f64], beta: f64) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = v.iter().map(|x| (beta * (x - m)).exp()).sum();
    m + sum.ln() / beta
}

/// Soft maximum of `-v`, i.e. the negated soft minimum.
fn soft_max_neg(v: &[f64], beta: f64) -> f64 {
    let m = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return -m;
    }
    let sum: f64 = v.iter().map(|x| (beta * (m - x)).exp()).sum();
    -m + sum.ln() / beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm::{SwarmState, SwarmTrajectory};

    fn single_agent_path(points: &[[f64; 2]]) -> SwarmTrajectory {
        // one follower parked on top of the leader keeps the pooled set equal to `points`
        let states = points
            .iter()
            .enumerate()
            .map(|(t, &p)| SwarmState {
                headings: vec![0.0, 0.0],
                positions: vec![p, p],
                t,
            })
            .collect();
        SwarmTrajectory {
            states,
            step_length: 1.0,
        }
    }

    #[test]
    fn two_diagonal_cells() {
        let traj = single_agent_path(&[[0.5, 0.5], [1.5, 1.5]]);
        let grid = GridSpec::new(1.0, [0.0, 0.0], 4).unwrap();
        let c = coverage_exact(&traj, &grid);
        assert_eq!(c.cells, 2.0);
        assert_eq!(explored_area_exact(&traj, &grid), 2.0);
    }

    #[test]
    fn straight_line_has_zero_area() {
        let pts: Vec<[f64; 2]> = (0..10).map(|t| [0.5, 0.5 + t as f64]).collect();
        let traj = single_agent_path(&pts);
        let grid = GridSpec::new(1.0, [-5.0, -5.0], 20).unwrap();
        assert_eq!(explored_area_exact(&traj, &grid), 0.0);
        let mut last = f64::INFINITY;
        for beta in [1.0, 10.0, 100.0, 1e3, 1e5] {
            let s = SmoothingParams {
                bbox_temperature: beta,
                coverage_width: 0.1,
                epsilon_guard: 1e-8,
            };
            let v = explored_area_smooth(&traj, &grid, &s);
            assert!(v < last);
            last = v;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn stationary_agent_soft_count() {
        let traj = single_agent_path(&[[0.3, 0.6]; 5]);
        let grid = GridSpec::new(1.0, [-2.0, -2.0], 4).unwrap();
        for width in [0.05, 0.2, 0.45] {
            let s = SmoothingParams {
                bbox_temperature: 10.0,
                coverage_width: width,
                epsilon_guard: 1e-8,
            };
            let c = coverage_smooth(&traj, &grid, &s);
            assert!(c.cells > 0.0 && c.cells < 16.0);
            assert!(c.cells > 1.0 - 1e-9);
        }
    }

    #[test]
    fn memberships_are_a_partition_of_unity() {
        let grid = GridSpec::new(1.0, [0.0, 0.0], 5).unwrap();
        let mut out = Vec::new();
        for sigma in [0.05, 0.1, 0.5, 2.0] {
            for v in [-0.3, 0.0, 0.95, 1.0, 1.05, 2.5, 3.98, 5.2] {
                axis_membership(&grid, 0, v, sigma, &mut out);
                let total: f64 = out.iter().map(|(_, m)| m).sum();
                assert!((total - 1.0).abs() < 1e-12, "v = {v}");
            }
        }
        // at a center with a narrow kernel the weight is all on that cell
        axis_membership(&grid, 0, 2.5, 0.05, &mut out);
        assert_eq!(out.len(), 1);
        // on an edge the two neighbours split evenly
        axis_membership(&grid, 0, 2.0, 0.1, &mut out);
        let half: Vec<f64> = out
            .iter()
            .filter(|(_, m)| *m > 1e-6)
            .map(|(_, m)| *m)
            .collect();
        assert_eq!(half.len(), 2);
        assert!((half[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_extrema_bound_the_true_extrema() {
        let v = [0.0, 1.0, 3.0, -2.0];
        for beta in [0.5, 5.0, 50.0] {
            assert!(soft_max(&v, beta) >= 3.0);
            assert!(-soft_max_neg(&v, beta) <= -2.0);
        }
        assert!((soft_max(&v, 1e4) - 3.0).abs() < 1e-3);
    }
}
