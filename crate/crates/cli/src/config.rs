//! Run configuration: TOML with dotted section keys, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vismem::encoder::EncoderSpec;
use vismem::metrics::TiePolicy;
use vismem::pipeline::ShortTermParams;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub n: usize,
    pub gamma_w: f64,
    pub gamma_r: f64,
    pub seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            n: 100,
            gamma_w: 5.0,
            gamma_r: 5.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShortTermConfig {
    pub max_epochs: usize,
    pub acc_threshold: f64,
    pub patience: usize,
}

impl Default for ShortTermConfig {
    fn default() -> Self {
        let p = ShortTermParams::default();
        Self {
            max_epochs: p.max_epochs,
            acc_threshold: p.acc_threshold,
            patience: p.patience,
        }
    }
}

impl From<&ShortTermConfig> for ShortTermParams {
    fn from(c: &ShortTermConfig) -> Self {
        ShortTermParams {
            max_epochs: c.max_epochs,
            acc_threshold: c.acc_threshold,
            patience: c.patience,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
    pub category_thresholds: Vec<u32>,
    pub stride: usize,
    pub tie: TiePolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1.0, 2.0, 3.0],
            category_thresholds: vec![1, 2],
            stride: 1,
            tie: TiePolicy::Optimistic,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_in: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub memory: MemoryConfig,
    pub encoder: EncoderSpec,
    pub short_term: ShortTermConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let m = &self.memory;
        if m.n == 0 {
            return bad("memory.n must be >= 1".into());
        }
        for (name, v) in [("memory.gamma_w", m.gamma_w), ("memory.gamma_r", m.gamma_r)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        self.encoder
            .validate()
            .map_err(|e| CliError::Config(format!("encoder: {e}")))?;
        let s = &self.short_term;
        if s.max_epochs == 0 || s.patience == 0 {
            return bad("short_term.max_epochs and short_term.patience must be >= 1".into());
        }
        if s.acc_threshold.is_nan() {
            return bad("short_term.acc_threshold must be a number".into());
        }
        let e = &self.eval;
        if e.deltas.is_empty() || e.deltas.iter().any(|d| !(*d >= 1.0 && d.is_finite())) {
            return bad(format!("eval.deltas must be a non-empty list of values >= 1, got {:?}", e.deltas));
        }
        if e.category_thresholds.is_empty() || e.category_thresholds.contains(&0) {
            return bad("eval.category_thresholds must be a non-empty list of values >= 1".into());
        }
        if e.stride == 0 {
            return bad("eval.stride must be >= 1".into());
        }
        Ok(())
    }

    /// One `section.key = value` line per leaf, sorted by key. The output is
    /// itself valid input.
    pub fn to_flat(&self) -> String {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        leaf => out.push(format!("{prefix} = {leaf}")),
    }
}
