use serde::{Deserialize, Serialize};

use super::ConstraintError;

/// Flat layout of the optimization variables: the full `m × m` weight
/// matrix row by row (the leader's own row included), then the leader
/// headings for `t = 1..=T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub agents: usize,
    pub steps: usize,
}

/// Role of one flat position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignRole {
    Weight { row: usize, col: usize },
    LeaderHeading { t: usize },
}

impl DesignLayout {
    pub fn new(agents: usize, steps: usize) -> Self {
        Self { agents, steps }
    }

    pub fn weight_count(&self) -> usize {
        self.agents * self.agents
    }

    pub fn len(&self) -> usize {
        self.weight_count() + self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight_index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.agents && col < self.agents);
        row * self.agents + col
    }

    /// Index of the leader heading at step `t` (1-based).
    pub fn heading_index(&self, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.steps);
        self.weight_count() + t - 1
    }

    pub fn role(&self, k: usize) -> Option<DesignRole> {
        if k < self.weight_count() {
            Some(DesignRole::Weight {
                row: k / self.agents,
                col: k % self.agents,
            })
        } else if k < self.len() {
            Some(DesignRole::LeaderHeading {
                t: k - self.weight_count() + 1,
            })
        } else {
            None
        }
    }
}

/// Values laid out per [`DesignLayout`]; headings in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub values: Vec<f64>,
    pub layout: DesignLayout,
}

impl DesignVector {
    pub fn from_values(values: Vec<f64>, layout: DesignLayout) -> Result<Self, ConstraintError> {
        if values.len() != layout.len() {
            return Err(ConstraintError::Dimension {
                expected: layout.len(),
                found: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    /// Packs a full `m × m` weight matrix and `T` leader headings.
    pub fn pack(weights: &[Vec<f64>], headings: &[f64]) -> Result<Self, ConstraintError> {
        let m = weights.len();
        if let Some(bad) = weights.iter().find(|r| r.len() != m) {
            return Err(ConstraintError::Dimension {
                expected: m,
                found: bad.len(),
            });
        }
        let layout = DesignLayout::new(m, headings.len());
        let mut values = Vec::with_capacity(layout.len());
        values.extend(weights.iter().flatten());
        values.extend_from_slice(headings);
        Ok(Self { values, layout })
    }

    /// Inverse of [`DesignVector::pack`].
    pub fn unpack(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = self.layout.agents;
        let w = self.values[..m * m]
            .chunks(m)
            .map(<[f64]>::to_vec)
            .collect();
        (w, self.headings().to_vec())
    }

    pub fn weight_rows(&self) -> impl Iterator<Item = &[f64]> {
        let m = self.layout.agents;
        self.values[..m * m].chunks(m)
    }

    pub fn headings(&self) -> &[f64] {
        &self.values[self.layout.weight_count()..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_indices() {
        let l = DesignLayout::new(4, 20);
        assert_eq!(l.len(), 36);
        assert_eq!(l.weight_index(1, 2), 6);
        assert_eq!(l.heading_index(1), 16);
        assert_eq!(l.heading_index(20), 35);
        assert_eq!(l.role(6), Some(DesignRole::Weight { row: 1, col: 2 }));
        assert_eq!(l.role(35), Some(DesignRole::LeaderHeading { t: 20 }));
        assert_eq!(l.role(36), None);
    }

    #[test]
    fn malformed_lengths_are_rejected() {
        let l = DesignLayout::new(4, 3);
        assert!(DesignVector::from_values(vec![0.0; 18], l).is_err());
        assert!(DesignVector::pack(&[vec![0.5, 0.5], vec![1.0]], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trips(
            w in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 4),
            h in prop::collection::vec(-10.0f64..10.0, 1..40),
        ) {
            let y = DesignVector::pack(&w, &h).unwrap();
            let (w2, h2) = y.unpack();
            prop_assert_eq!(&w2, &w);
            prop_assert_eq!(&h2, &h);
            let again = DesignVector::pack(&w2, &h2).unwrap();
            prop_assert_eq!(again.values, y.values);
        }
    }
}
