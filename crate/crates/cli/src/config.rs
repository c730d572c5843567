//! Run configuration. Precedence: flags > environment > config file > defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT_DIR: &str = "gffm-out";

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub replicates: Option<usize>,
    pub refinement: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Values from the command line or environment; `None` means unset.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub replicates: Option<usize>,
    pub refinement: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub replicates: Option<usize>,
    pub refinement: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(over: Overrides, file: FileConfig) -> anyhow::Result<Self> {
        let cfg = Self {
            seed: over.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            threads: over.threads.or(file.threads),
            replicates: over.replicates.or(file.replicates),
            refinement: over.refinement.or(file.refinement),
            out_dir: over.out_dir.or(file.out_dir).unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
        };
        if cfg.replicates == Some(0) {
            bail!("replicates must be at least 1");
        }
        if cfg.refinement == Some(0) {
            bail!("refinement must be at least 1");
        }
        if cfg.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(cfg)
    }

    pub fn replicates_or(&self, default: usize) -> usize {
        self.replicates.unwrap_or(default)
    }

    pub fn refinement_or(&self, default: usize) -> usize {
        self.refinement.unwrap_or(default)
    }
}
