use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plateau_core::diagnostics::Thresholds;
use plateau_core::reflection::BjorlingOptions;
use plateau_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

/// Settings shared by all commands, read from one TOML file. Relative paths
/// are resolved against the directory of that file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Boundary graph JSON for `solve`.
    pub graph: Option<PathBuf>,
    /// Radial resolution of each half-disk sheet.
    pub radial: usize,
    /// Angular resolution of each half-disk sheet.
    pub angular: usize,
    pub solve: SolveConfig,
    pub thresholds: Thresholds,
    pub bjorling: BjorlingOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            graph: None,
            radial: 8,
            angular: 16,
            solve: SolveConfig::default(),
            thresholds: Thresholds::default(),
            bjorling: BjorlingOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let (Some(g), Some(base)) = (&cfg.graph, path.parent()) {
            if g.is_relative() {
                cfg.graph = Some(base.join(g));
            }
        }
        Ok(cfg)
    }

    /// `--resolution R` means `R` radial and `2R` angular subdivisions.
    pub fn set_resolution(&mut self, r: usize) {
        self.radial = r;
        self.angular = 2 * r;
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial < 1 || self.angular < 2 {
            bail!("resolutions must satisfy radial >= 1 and angular >= 2");
        }
        self.solve.validate()?;
        Ok(())
    }
}

/// The default configuration as TOML, shown in `--help`.
pub fn defaults_help() -> String {
    fn scalar(v: &toml::Value) -> String {
        match v {
            toml::Value::Float(f) if *f != 0.0 && f.abs() < 1e-3 => format!("{f:e}"),
            other => other.to_string(),
        }
    }
    let value = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
    let mut out = String::from("Configuration file keys and their defaults:\n\n");
    let table = value.as_table().expect("config is a table");
    let mut sections = Vec::new();
    for (key, v) in table {
        match v {
            toml::Value::Table(t) => sections.push((key, t)),
            other => out.push_str(&format!("{key} = {}\n", scalar(other))),
        }
    }
    for (name, t) in sections {
        out.push_str(&format!("\n[{name}]\n"));
        for (key, v) in t {
            out.push_str(&format!("{key} = {}\n", scalar(v)));
        }
    }
    out
}
