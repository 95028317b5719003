use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SweepError;
use crate::fit::logspace;
use crate::resolvent::{BetaStrategy, GridRule, DEFAULT_EPS2, DEFAULT_MARGIN};
use crate::DampingProfile;

/// Named checks a config may request.
pub const CHECKS: &[&str] = &["damping_identity", "commutator_identity", "low_energy", "decay"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSize {
    Fixed(usize),
    /// The string `"auto"`: `n = max(128, 8⌈q^{1/2}⌉)` per q.
    Auto(String),
}

impl Default for GridSize {
    fn default() -> Self {
        GridSize::Auto("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSection {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub q_values: Option<Vec<f64>>,
    #[serde(default)]
    pub q_range: Option<QRange>,
    /// One of `modes`, `worst`, `list`.
    #[serde(default = "default_strategy")]
    pub beta_strategy: String,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    /// Move each q onto a y-mode resonance of the worst 1D β.
    #[serde(default)]
    pub snap: bool,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub gamma: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default = "default_k_max")]
    pub k_max: i64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        DecaySection { k_max: default_k_max(), t_max: default_t_max(), n_times: default_n_times() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid_n: GridSize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub checks: Vec<String>,
    pub profile: ProfileSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub decay: DecaySection,
}

fn default_strategy() -> String {
    "modes".into()
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}
fn default_eps2() -> f64 {
    DEFAULT_EPS2
}
fn default_k_max() -> i64 {
    16
}
fn default_t_max() -> f64 {
    1e4
}
fn default_n_times() -> usize {
    120
}
fn default_output() -> PathBuf {
    PathBuf::from("dampwave-out")
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| SweepError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|e| SweepError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), SweepError> {
        match &self.grid_n {
            GridSize::Auto(s) if s != "auto" => {
                return Err(SweepError::Config(format!("grid_n must be an even integer or \"auto\", got \"{s}\"")));
            }
            GridSize::Fixed(n) => {
                crate::grid::PeriodicGrid::new(*n).map_err(|e| SweepError::Config(format!("grid_n: {e}")))?;
            }
            _ => {}
        }
        for c in &self.checks {
            if !CHECKS.contains(&c.as_str()) {
                return Err(SweepError::Unknown { kind: "check", name: c.clone() });
            }
        }
        match self.sweep.beta_strategy.as_str() {
            "modes" | "worst" => {}
            "list" if !self.sweep.betas.is_empty() => {}
            "list" => return Err(SweepError::Config("beta_strategy \"list\" needs a nonempty betas list".into())),
            other => return Err(SweepError::Unknown { kind: "beta strategy", name: other.into() }),
        }
        if self.sweep.q_values.is_some() == self.sweep.q_range.is_some() {
            return Err(SweepError::Config("give exactly one of sweep.q_values and sweep.q_range".into()));
        }
        if self.q_values().iter().any(|q| !(*q > 0.0)) {
            return Err(SweepError::Config("q values must be positive".into()));
        }
        self.build_profile()?;
        Ok(())
    }

    pub fn build_profile(&self) -> Result<DampingProfile, SweepError> {
        DampingProfile::from_name(&self.profile.name, &self.profile.params).map_err(|e| match e {
            crate::Error::UnknownName(_) => SweepError::Unknown { kind: "profile", name: self.profile.name.clone() },
            e => SweepError::Config(e.to_string()),
        })
    }

    pub fn q_values(&self) -> Vec<f64> {
        match (&self.sweep.q_values, &self.sweep.q_range) {
            (Some(v), _) => v.clone(),
            (None, Some(r)) => logspace(r.from, r.to, r.count),
            (None, None) => Vec::new(),
        }
    }

    pub fn grid_rule(&self) -> GridRule {
        match self.grid_n {
            GridSize::Fixed(n) => GridRule::Fixed(n),
            GridSize::Auto(_) => GridRule::Scaled { mult: 8, min: 128 },
        }
    }

    pub fn beta_strategy(&self) -> BetaStrategy {
        match self.sweep.beta_strategy.as_str() {
            "worst" => BetaStrategy::Worst { eps2: self.sweep.eps2 },
            "list" => BetaStrategy::List(self.sweep.betas.clone()),
            _ => BetaStrategy::Modes { margin: self.sweep.margin },
        }
    }

    /// Everything that affects results, as canonical JSON. The output
    /// directory is excluded so that moving a run does not invalidate it.
    pub fn canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        serde_json::to_string(&v).expect("json")
    }
}
