//! Config-driven sweeps with cached, reproducible CSV and JSON output.

mod config;
mod render;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::ExponentFit;

pub use config::{DecaySection, GridSize, ProfileSection, QRange, SweepConfig, SweepSection, CHECKS};
pub use render::{render, render_svg, RenderOutput};
pub use run::{cache_root, config_hash, run, run_config, RunOptions, CACHE_ENV, DECAY_CSV, REPORT_JSON, RESOLVENT_CSV};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error("numerical failure in {stage}: {source}")]
    Numeric {
        stage: String,
        #[source]
        source: crate::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SweepError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config(_) => 2,
            SweepError::Unknown { .. } => 3,
            SweepError::Numeric { .. } => 4,
            SweepError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SweepError {
        let path = path.into();
        move |source| SweepError::Io { path, source }
    }
}

/// Data behind a fit, kept so plots can be redrawn from the report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    #[serde(flatten)]
    pub fit: ExponentFit,
    pub series: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub pass: bool,
    pub values: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub sqrt_energy_over_data_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub cached: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub fits: BTreeMap<String, FitEntry>,
    pub checks: BTreeMap<String, CheckResult>,
    #[serde(default)]
    pub traces: BTreeMap<String, TraceSeries>,
    pub provenance: Provenance,
}
