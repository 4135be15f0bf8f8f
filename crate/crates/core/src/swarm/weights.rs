use serde::{Deserialize, Serialize};

use super::SwarmError;

/// Default tolerance for the row-stochastic check.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic edge weights of the cooperative agents.
///
/// One row per cooperative agent, one column per agent (the leader is the
/// last column). Row `i` gives the convex combination agent `i` applies to
/// the previous headings of every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: Vec<Vec<f64>>,
    lower_bound: f64,
}

impl WeightMatrix {
    /// Validates with the default row-sum tolerance and a zero lower bound.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, SwarmError> {
        Self::with_lower_bound(rows, 0.0, ROW_SUM_TOL)
    }

    /// Validates shape, non-negativity, the lower bound and row sums.
    pub fn with_lower_bound(
        rows: Vec<Vec<f64>>,
        lower_bound: f64,
        row_sum_tol: f64,
    ) -> Result<Self, SwarmError> {
        let agents = rows.len() + 1;
        if rows.is_empty() {
            return Err(SwarmError::Dimension {
                expected: 2,
                found: 1,
                what: "agents",
            });
        }
        for row in &rows {
            if row.len() != agents {
                return Err(SwarmError::Dimension {
                    expected: agents,
                    found: row.len(),
                    what: "weight row length",
                });
            }
        }
        let sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        let bad_sum = sums
            .iter()
            .any(|s| !s.is_finite() || (s - 1.0).abs() > row_sum_tol);
        let bad_entry = rows
            .iter()
            .flatten()
            .any(|&w| !w.is_finite() || w < 0.0 || w < lower_bound - row_sum_tol);
        if bad_sum || bad_entry {
            return Err(SwarmError::InvalidWeights { row_sums: sums });
        }
        Ok(Self { rows, lower_bound })
    }

    /// Uniform weights `1/m` in every row.
    pub fn uniform(agents: usize) -> Self {
        let w = 1.0 / agents as f64;
        Self {
            rows: vec![vec![w; agents]; agents - 1],
            lower_bound: 0.0,
        }
    }

    pub fn agents(&self) -> usize {
        self.rows.len() + 1
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }
}
