//! Run configuration and the on-disk layout of generated artifacts.

use std::path::{Path, PathBuf};

use anyhow::Context;
use memrex::agents::TransEConfig;
use memrex::catalog::{CatalogConfig, Split};
use memrex::simulator::SimulatorConfig;
use memrex::umgr::UmgrConfig;
use serde::{Deserialize, Serialize};

/// Everything a `--config` JSON file may set. Missing sections take their
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub catalog: CatalogConfig,
    pub simulator: SimulatorConfig,
    pub transe: TransEConfig,
    /// Overrides the profile chosen on the command line.
    pub umgr: Option<UmgrConfig>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(p) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    /// The flag (or `MEMREX_DATA_DIR`) wins over the file; `./data` is the fallback.
    pub fn layout(&self, flag: Option<&Path>) -> Layout {
        let root = flag
            .map(Path::to_path_buf)
            .or_else(|| self.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data"));
        Layout { root }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn catalog(&self) -> PathBuf {
        self.root.join("catalog.jsonl")
    }

    pub fn scenarios(&self, split: Split) -> PathBuf {
        self.root.join(format!("scenarios.{}.jsonl", split.as_str()))
    }

    pub fn corpus(&self, split: Split) -> PathBuf {
        self.root.join(format!("corpus.{}.jsonl", split.as_str()))
    }

    pub fn umgr(&self) -> PathBuf {
        self.root.join("umgr.ckpt")
    }

    pub fn transe(&self) -> PathBuf {
        self.root.join("transe.json")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}
