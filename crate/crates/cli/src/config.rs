//! Experiment configuration: a TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zvonkin_lab::model::{ModelSpec, ValidationConfig};
use zvonkin_lab::simulate::Scheme;
use zvonkin_lab::tci::TciConfig;
use zvonkin_lab::zvonkin::{EllipticConfig, LambdaStrategy, ParabolicConfig, TransformConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("override `{key}` conflicts with a non-table value at `{at}`")]
    OverridePath { key: String, at: String },
    #[error("config key `{path}`: {message}")]
    Schema { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Fixed `λ`; auto-doubling when absent.
    pub lambda: Option<f64>,
    pub strategy: LambdaStrategy,
    pub parabolic: ParabolicConfig,
    pub elliptic: Option<EllipticConfig>,
    /// Extra `λ` values for the decay sweep export.
    pub lambda_sweep: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = TransformConfig::default();
        Self { lambda: t.lambda, strategy: t.strategy, parabolic: t.parabolic, elliptic: t.elliptic, lambda_sweep: Vec::new() }
    }
}

impl PipelineConfig {
    pub fn transform(&self) -> TransformConfig {
        TransformConfig { lambda: self.lambda, strategy: self.strategy, parabolic: self.parabolic, elliptic: self.elliptic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Origin when empty.
    pub x0: Vec<f64>,
    pub steps: usize,
    pub n_paths: usize,
    pub scheme: Scheme,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { x0: Vec::new(), steps: 256, n_paths: 100, scheme: Scheme::EulerMaruyama }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub json: bool,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("zvlab-out"), json: true, csv: true }
    }
}

/// Full experiment description. `validation.seed` and `harness.seed` are
/// replaced by the master `seed` on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Required by every subcommand except `invariance`.
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub harness: TciConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// SHA-256 of the effective configuration in canonical JSON form. The
    /// output section is left out: where files go does not change them.
    pub fn hash(&self) -> String {
        let canonical = Self { output: OutputConfig::default(), ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn model(&self) -> Result<&ModelSpec, ConfigError> {
        self.model.as_ref().ok_or(ConfigError::Schema { path: "model".into(), message: "missing section".into() })
    }

    pub fn x0(&self, model: &ModelSpec) -> Vec<f64> {
        if self.simulate.x0.is_empty() {
            vec![0.0; model.dim()]
        } else {
            self.simulate.x0.clone()
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let mut cur = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::OverridePath {
            key: key.into(),
            at: parts[..=i].join("."),
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn from_table(table: toml::Table) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path, message: e.into_inner().to_string() }
    })?;
    cfg.validation.seed = cfg.seed;
    cfg.harness.seed = cfg.seed;
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"
seed = 4
[model]
kind = "singular"
dim = 1
horizon = 1.0
p = 4.0
c0 = 1.0
beta = 0.5
singular_drift = { family = "zero" }
growth_drift = { family = "radial_power", coeff = -1.0, power = 0.0 }
growth = { kind = "dissipative", r = 0.0, kappa1 = 1.0, kappa2 = 0.0, kappa3 = 1.0 }
sigma = { family = "scaled_identity", scale = 1.0 }
"#;

    #[test]
    fn overrides_reach_nested_keys() {
        let mut t: toml::Table = OU.parse().unwrap();
        apply_override(&mut t, "harness.time_steps=16").unwrap();
        apply_override(&mut t, "output.dir=runs/a").unwrap();
        apply_override(&mut t, "seed = 9").unwrap();
        let cfg = from_table(t).unwrap();
        assert_eq!(cfg.harness.time_steps, 16);
        assert_eq!(cfg.output.dir, PathBuf::from("runs/a"));
        assert_eq!((cfg.seed, cfg.harness.seed, cfg.validation.seed), (9, 9, 9));
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let mut t: toml::Table = OU.parse().unwrap();
        apply_override(&mut t, "pipeline.parabolic.bogus=1").unwrap();
        match from_table(t) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "pipeline.parabolic.bogus"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_effective_config() {
        let a = from_table(OU.parse().unwrap()).unwrap();
        let mut t: toml::Table = OU.parse().unwrap();
        apply_override(&mut t, "simulate.steps=10").unwrap();
        let b = from_table(t).unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut t: toml::Table = OU.parse().unwrap();
        apply_override(&mut t, "output.dir=elsewhere").unwrap();
        assert_eq!(from_table(t).unwrap().hash(), a.hash());
    }

    #[test]
    fn malformed_override_is_rejected() {
        let mut t = toml::Table::new();
        assert!(matches!(apply_override(&mut t, "novalue"), Err(ConfigError::Override(_))));
        assert!(matches!(apply_override(&mut t, "a..b=1"), Err(ConfigError::Override(_))));
    }
}
