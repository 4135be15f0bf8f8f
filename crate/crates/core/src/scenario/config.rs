use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::constraints::{ConstraintSet, SwarmModel};
use crate::objectives::{GridSpec, ObjectiveWeights, Phi1Variant, SmoothingParams};
use crate::sqp::SolverConfig;
use crate::swarm::SwarmState;

/// Initial positions and headings of every agent; the leader is last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formation {
    pub positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub headings_deg: Vec<f64>,
}

impl Default for Formation {
    /// Diamond with the leader trailing at the origin.
    fn default() -> Self {
        Self {
            positions: vec![[-1.0, 1.0], [1.0, 1.0], [0.0, 2.0], [0.0, 0.0]],
            headings_deg: vec![0.0; 4],
        }
    }
}

/// Where the consensus utopia value used by the joint solve comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusUtopia {
    /// Minimize f2 alone under the full constraint set.
    #[default]
    Solver,
    /// f2 of the rollout with Metropolis weights.
    Metropolis,
}

/// Everything one optimization run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub steps: usize,
    #[serde(default = "one")]
    pub step_length: f64,
    pub a1: f64,
    pub a2: f64,
    pub min_tol: f64,
    pub max_tol: f64,
    pub target: [f64; 2],
    #[serde(default)]
    pub phi1_variant: Phi1Variant,
    #[serde(default)]
    pub consensus_utopia: ConsensusUtopia,
    #[serde(default = "default_lower_bound")]
    pub weight_lower_bound: f64,
    #[serde(default = "default_tol_eq")]
    pub tol_eq: f64,
    #[serde(default = "default_tol_ineq")]
    pub tol_ineq: f64,
    #[serde(default)]
    pub formation: Formation,
    /// Defaults to one cell per step length covering the reachable envelope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub smoothing: SmoothingParams,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Reference cooperative weight rows to compare the optimum against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_weights: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

fn default_lower_bound() -> f64 {
    0.1
}

fn default_tol_eq() -> f64 {
    1e-6
}

fn default_tol_ineq() -> f64 {
    1e-8
}

impl ScenarioConfig {
    /// Parses TOML text, applying `key.path=value` overrides first so that
    /// errors name the offending key.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ScenarioError> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: Self = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn agents(&self) -> usize {
        self.formation.positions.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.steps < 1 {
            return bad("steps must be at least 1".into());
        }
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return bad(format!(
                "step_length must be positive, got {}",
                self.step_length
            ));
        }
        ObjectiveWeights::new(self.a1, self.a2)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.constraint_set()
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let m = self.agents();
        if m < 2 {
            return bad("formation needs at least two agents".into());
        }
        if !self.formation.headings_deg.is_empty() && self.formation.headings_deg.len() != m {
            return bad(format!(
                "formation.headings_deg has {} entries for {m} agents",
                self.formation.headings_deg.len()
            ));
        }
        let lb = self.weight_lower_bound;
        if !(lb >= 0.0 && lb * m as f64 <= 1.0) {
            return bad(format!("weight_lower_bound {lb} must lie in [0, 1/{m}]"));
        }
        if !self.target.iter().all(|v| v.is_finite()) {
            return bad("target must be finite".into());
        }
        let start = self.formation.positions[m - 1];
        let dist = (self.target[0] - start[0]).hypot(self.target[1] - start[1]);
        let reach = self.steps as f64 * self.step_length;
        if dist > reach * (1.0 + 1e-12) {
            return bad(format!(
                "target at distance {dist} is beyond reach {reach} of {} steps",
                self.steps
            ));
        }
        if let Some(g) = &self.grid {
            g.validate()
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        self.smoothing
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.solver
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if let Some(r) = &self.reference_weights {
            if r.len() != m - 1 || r.iter().any(|row| row.len() != m) {
                return bad(format!(
                    "reference_weights must be {} rows of {m} entries",
                    m - 1
                ));
            }
        }
        Ok(())
    }

    pub fn objective_weights(&self) -> ObjectiveWeights {
        ObjectiveWeights {
            a1: self.a1,
            a2: self.a2,
        }
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        ConstraintSet {
            min_tol: self.min_tol,
            max_tol: self.max_tol,
            target: self.target,
            tol_eq: self.tol_eq,
            tol_ineq: self.tol_ineq,
        }
    }

    pub fn initial_state(&self) -> SwarmState {
        let m = self.agents();
        let headings = if self.formation.headings_deg.is_empty() {
            vec![0.0; m]
        } else {
            self.formation
                .headings_deg
                .iter()
                .map(|d| d.to_radians())
                .collect()
        };
        SwarmState {
            headings,
            positions: self.formation.positions.clone(),
            t: 0,
        }
    }

    pub fn model(&self) -> SwarmModel {
        SwarmModel::new(self.initial_state(), self.step_length, self.steps)
    }

    /// The configured grid, or one cell per step length around the leader's
    /// start covering everything reachable in `T` steps.
    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_else(|| {
            let p = &self.formation.positions;
            GridSpec::covering(
                p[p.len() - 1],
                p,
                self.steps as f64 * self.step_length,
                self.step_length,
            )
        })
    }
}

/// Sets `path = value` inside `table`, creating intermediate tables. The
/// value is parsed as a TOML literal, falling back to a bare string.
fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), ScenarioError> {
    let (path, raw) = ov
        .split_once('=')
        .ok_or_else(|| ScenarioError::Override(format!("`{ov}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ScenarioError::Override(format!(
            "empty key segment in `{path}`"
        )));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            ScenarioError::Override(format!("`{k}` in `{path}` is not a section"))
        })?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
steps = 10
a1 = 0.5
a2 = 0.5
min_tol = 0.2
max_tol = 5.0
target = [1.0, 8.0]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.step_length, 1.0);
        assert_eq!(c.weight_lower_bound, 0.1);
        assert_eq!(c.formation, Formation::default());
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.phi1_variant, Phi1Variant::InverseGap);
    }

    #[test]
    fn overrides_reach_nested_sections() {
        let ov = vec![
            "solver.max_func_evals=1".to_string(),
            "a1 = 0.25".to_string(),
            "a2=0.75".to_string(),
            "phi1_variant=ratio".to_string(),
        ];
        let c = ScenarioConfig::from_toml_str(MINIMAL, &ov).unwrap();
        assert_eq!(c.solver.max_func_evals, 1);
        assert_eq!((c.a1, c.a2), (0.25, 0.75));
        assert_eq!(c.phi1_variant, Phi1Variant::Ratio);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err =
            ScenarioConfig::from_toml_str(MINIMAL, &["solver.max_evals=3".into()]).unwrap_err();
        assert!(err.to_string().contains("max_evals"), "{err}");
        let err =
            ScenarioConfig::from_toml_str(&format!("{MINIMAL}\nbogus = 1\n"), &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for ov in [
            "a1=0.9",
            "steps=0",
            "min_tol=6.0",
            "target=[0.0, 50.0]",
            "weight_lower_bound=0.3",
        ] {
            assert!(
                ScenarioConfig::from_toml_str(MINIMAL, &[ov.into()]).is_err(),
                "{ov}"
            );
        }
        assert!(ScenarioConfig::from_toml_str(MINIMAL, &["novalue".into()]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ScenarioConfig::from_toml_str(MINIMAL, &[]).unwrap();
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn default_grid_centers_the_leader() {
        let c = ScenarioConfig::from_toml_str(MINIMAL, &[]).unwrap();
        let g = c.grid();
        assert_eq!(g.cell_size, 1.0);
        assert_eq!(g.origin, [-11.5, -10.5]);
        assert!(g.cell_of([0.0, 12.0]).is_some() && g.cell_of([-11.0, -10.0]).is_some());
    }
}
