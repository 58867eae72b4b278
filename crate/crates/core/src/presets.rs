//! Checked-in configurations for the benchmark experiments.

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const PRESETS: [(&str, &str); 4] = [
    ("bandit", include_str!("../presets/bandit.toml")),
    ("grid8", include_str!("../presets/grid8.toml")),
    ("continuous", include_str!("../presets/continuous.toml")),
    ("continuous_optql", include_str!("../presets/continuous_optql.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// TOML source of a preset.
pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            Error::Parse(format!(
                "unknown preset `{name}`; available: {}",
                preset_names().collect::<Vec<_>>().join(", ")
            ))
        })
}

/// Parsed and validated preset.
pub fn preset(name: &str) -> Result<RunConfig> {
    let cfg = RunConfig::from_toml_str(preset_source(name)?)?;
    cfg.validate()?;
    Ok(cfg)
}
