//! Run manifest: what ran, on which configuration, how it ended.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    CheckFailure,
    UsageError,
    NumericalFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::CheckFailure => 1,
            Status::UsageError => 2,
            Status::NumericalFailure => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub core: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_source: Option<String>,
    /// SHA-256 of the fully defaulted configuration as compact JSON.
    pub config_hash: Option<String>,
    pub config: Option<RunConfig>,
    pub versions: Versions,
    pub workers: usize,
    pub status: Status,
    pub exit_code: u8,
    pub failure_stage: Option<String>,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    pub check_runtimes_s: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config_source: None,
            config_hash: None,
            config: None,
            versions: Versions { cli: env!("CARGO_PKG_VERSION"), core: fsstokes::VERSION },
            workers: 0,
            status: Status::Success,
            exit_code: 0,
            failure_stage: None,
            error: None,
            wall_time_s: 0.0,
            artifacts: vec![],
            check_runtimes_s: BTreeMap::new(),
        }
    }

    pub fn set_config(&mut self, cfg: &RunConfig) {
        self.config_hash = Some(config_hash(cfg));
        self.config = Some(cfg.clone());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }
}

/// Output directory and worker count do not change results and are left out.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = RunConfig::default().output_dir;
    c.workers = None;
    let text = serde_json::to_string(&c).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
