use serde::{Deserialize, Serialize};

use super::{ResultBundle, ScenarioError};
use crate::swarm::WeightMatrix;

/// Entries within this distance of the lower bound count as bound-active.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiff {
    pub row: usize,
    /// The leader column is (one of) the row's largest entries.
    pub leader_dominant: bool,
    pub reference_leader_dominant: bool,
    pub at_lower_bound: usize,
    pub reference_at_lower_bound: usize,
    pub row_sum_residual: f64,
    /// `actual - reference`, element-wise.
    pub deltas: Vec<f64>,
}

/// Structural comparison of an optimal matrix with a reference one. No
/// verdict on the values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralDiffReport {
    pub lower_bound: f64,
    pub rows: Vec<RowDiff>,
    pub max_abs_delta: f64,
}

impl StructuralDiffReport {
    pub fn leader_dominant_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.leader_dominant).count()
    }

    pub fn all_leader_dominant(&self) -> bool {
        self.leader_dominant_rows() == self.rows.len()
    }

    pub fn bound_active(&self) -> usize {
        self.rows.iter().map(|r| r.at_lower_bound).sum()
    }
}

fn leader_dominant(row: &[f64]) -> bool {
    let (last, rest) = row.split_last().expect("non-empty row");
    rest.iter().all(|w| w <= last)
}

fn at_bound(row: &[f64], lb: f64) -> usize {
    row.iter().filter(|w| (*w - lb).abs() <= BOUND_TOL).count()
}

/// Compares cooperative weight rows against `reference` row by row.
pub fn compare_weights(
    actual: &[Vec<f64>],
    reference: &[Vec<f64>],
    lower_bound: f64,
) -> Result<StructuralDiffReport, ScenarioError> {
    let shape = |w: &[Vec<f64>]| (w.len(), w.first().map_or(0, Vec::len));
    let ragged = |w: &[Vec<f64>]| w.iter().any(|r| r.len() != shape(w).1);
    if shape(actual) != shape(reference) || ragged(actual) || ragged(reference) || actual.is_empty()
    {
        return Err(ScenarioError::Dimension(format!(
            "weights are {}x{}, reference is {}x{}",
            shape(actual).0,
            shape(actual).1,
            shape(reference).0,
            shape(reference).1
        )));
    }
    let rows: Vec<RowDiff> = actual
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(i, (a, r))| RowDiff {
            row: i + 1,
            leader_dominant: leader_dominant(a),
            reference_leader_dominant: leader_dominant(r),
            at_lower_bound: at_bound(a, lower_bound),
            reference_at_lower_bound: at_bound(r, lower_bound),
            row_sum_residual: a.iter().sum::<f64>() - 1.0,
            deltas: a.iter().zip(r).map(|(x, y)| x - y).collect(),
        })
        .collect();
    let max_abs_delta = rows
        .iter()
        .flat_map(|r| r.deltas.iter().map(|d| d.abs()))
        .fold(0.0, f64::max);
    Ok(StructuralDiffReport {
        lower_bound,
        rows,
        max_abs_delta,
    })
}

pub fn compare_to_reference(
    bundle: &ResultBundle,
    reference: &WeightMatrix,
) -> Result<StructuralDiffReport, ScenarioError> {
    compare_weights(
        &bundle.weights,
        reference.rows(),
        bundle.config.weight_lower_bound,
    )
}
