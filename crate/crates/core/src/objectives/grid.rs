use serde::{Deserialize, Serialize};

use super::ObjectiveError;

/// Square exploration grid of `cells × cells` squares.
///
/// `origin` is the lower-left corner. Cells are closed on their upper edge:
/// a coordinate lying exactly on a boundary belongs to the lower-index cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub cells: usize,
}

impl GridSpec {
    pub fn new(cell_size: f64, origin: [f64; 2], cells: usize) -> Result<Self, ObjectiveError> {
        let g = Self {
            cell_size,
            origin,
            cells,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(ObjectiveError::InvalidGrid(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.cells == 0 {
            return Err(ObjectiveError::InvalidGrid(
                "cells must be at least 1".into(),
            ));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(ObjectiveError::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    /// Grid with `cell_size` covering everything reachable in `reach` length
    /// units from any starting position, placed so that `anchor` (the initial
    /// leader position) sits at a cell center.
    pub fn covering(anchor: [f64; 2], starts: &[[f64; 2]], reach: f64, cell_size: f64) -> Self {
        let mut lo = anchor;
        let mut hi = anchor;
        for p in starts {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let mut origin = [0.0; 2];
        let mut cells = 1usize;
        for a in 0..2 {
            let below = ((anchor[a] - (lo[a] - reach)) / cell_size - 0.5)
                .ceil()
                .max(0.0);
            origin[a] = anchor[a] - (below + 0.5) * cell_size;
            let span = ((hi[a] + reach - origin[a]) / cell_size).ceil() as usize;
            cells = cells.max(span + 1);
        }
        Self {
            cell_size,
            origin,
            cells,
        }
    }

    /// Lower edge of cell `k` along axis `axis`.
    pub fn edge(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + k as f64 * self.cell_size
    }

    /// Cell index of coordinate `v` along `axis`, if inside the grid.
    pub fn index(&self, axis: usize, v: f64) -> Option<usize> {
        if !v.is_finite() {
            return None;
        }
        let guess = ((v - self.origin[axis]) / self.cell_size).ceil() - 1.0;
        if guess < -1.0 || guess > self.cells as f64 {
            return None;
        }
        // Settle on the exact (lo, hi] membership as computed by `edge`.
        let mut k = guess as i64;
        while k >= 0 && v <= self.origin[axis] + k as f64 * self.cell_size {
            k -= 1;
        }
        while v > self.origin[axis] + (k + 1) as f64 * self.cell_size {
            k += 1;
        }
        if k < 0 || k as usize >= self.cells {
            None
        } else {
            Some(k as usize)
        }
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        Some((self.index(0, p[0])?, self.index(1, p[1])?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_belongs_to_lower_cell() {
        let g = GridSpec::new(1.0, [0.0, 0.0], 4).unwrap();
        assert_eq!(g.index(0, 1.0), Some(0));
        assert_eq!(g.index(0, 1.0 + 1e-12), Some(1));
        assert_eq!(g.index(0, 0.5), Some(0));
        assert_eq!(g.index(0, 0.0), None);
        assert_eq!(g.index(0, 4.0), Some(3));
        assert_eq!(g.index(0, 4.1), None);
    }

    #[test]
    fn covering_grid_centers_anchor() {
        let starts = [[-1.0, 1.0], [1.0, 1.0], [0.0, 2.0], [0.0, 0.0]];
        let g = GridSpec::covering([0.0, 0.0], &starts, 20.0, 1.0);
        let (lo, hi) = ([-21.0, -20.0], [21.0, 22.0]);
        for a in 0..2 {
            let k = g.index(a, 0.0).unwrap();
            let center = g.edge(a, k) + 0.5;
            assert!(center.abs() < 1e-12);
            assert!(g.origin[a] <= lo[a]);
            assert!(g.edge(a, g.cells) >= hi[a]);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(0.0, [0.0, 0.0], 3).is_err());
        assert!(GridSpec::new(1.0, [0.0, 0.0], 0).is_err());
    }
}
