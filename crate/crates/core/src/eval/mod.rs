//! Run configuration, offline data generation, the discover/distill pipeline, suite
//! execution and metric reports.

mod config;
mod gendata;
mod metrics;
mod pipeline;
mod run;
mod suite;

pub use config::{DiscoveryConfig, Mode, RunConfig};
pub use gendata::{gen_offline_data, write_offline_data, GenReport};
pub use metrics::{
    compute_metrics, percent, render_comparison, render_report, Cell, EpisodeSummary, Layout, SuiteMetrics,
    EMPTY_CELL, HOUSEHOLD_COLUMNS,
};
pub use pipeline::{run_discover, run_distill, DiscoverArtifacts};
pub use run::{build_policy, run_suite, Policy, SuiteRun};
pub use suite::{generate_suite, household_counts, CatalogCache, Suite, SuiteEntry, TABLE1_HOUSEHOLD_COUNTS};

use crate::discovery::DiscoveryError;
use crate::distill::DistillError;
use crate::env::EnvError;
use crate::gateway::GatewayError;
use crate::trajectory::DatasetError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Write to a sibling temp file, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    if let Some(d) = path.parent() {
        if !d.as_os_str().is_empty() {
            fs::create_dir_all(d).map_err(|e| EvalError::io(d, e))?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| EvalError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| EvalError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| EvalError::io(path, e))
}

pub(crate) fn require(path: &Path) -> Result<(), EvalError> {
    if path.exists() {
        Ok(())
    } else {
        Err(EvalError::MissingArtifact(path.to_path_buf()))
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
    atomic_write(path, text.as_bytes())
}
