use std::collections::BTreeMap;
use std::path::Path;

use super::{ScenarioConfig, ScenarioError};

const SOURCES: [(&str, &str); 3] = [
    ("sim1", include_str!("../../../../scenarios/sim1.toml")),
    ("sim2", include_str!("../../../../scenarios/sim2.toml")),
    ("sim3", include_str!("../../../../scenarios/sim3.toml")),
];

/// TOML text of the built-in scenario `name`.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

/// The shipped scenarios keyed by name.
pub fn builtin_scenarios() -> BTreeMap<String, ScenarioConfig> {
    SOURCES
        .iter()
        .map(|(name, text)| {
            let cfg = ScenarioConfig::from_toml_str(text, &[])
                .unwrap_or_else(|e| panic!("built-in scenario {name} is invalid: {e}"));
            (name.to_string(), cfg)
        })
        .collect()
}

/// Loads a built-in scenario by name, or else a scenario file, and applies
/// the overrides.
pub fn resolve_scenario(
    name_or_path: &str,
    overrides: &[String],
) -> Result<ScenarioConfig, ScenarioError> {
    if let Some(text) = builtin_source(name_or_path) {
        return ScenarioConfig::from_toml_str(text, overrides);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_toml_str(&text, overrides)
}
