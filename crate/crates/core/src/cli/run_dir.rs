use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// `<root>/<timestamp>-<hash>/{config.toml, checkpoints/, logs/, reports/, images/}`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub const SUBDIRS: [&'static str; 4] = ["checkpoints", "logs", "reports", "images"];

    /// Create a fresh run directory under `runs_dir`, or exactly at `explicit`.
    pub fn create(cfg: &RunConfig, runs_dir: &Path, explicit: Option<&Path>) -> Result<Self> {
        let root = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
                let base = format!("{stamp}-{}", cfg.fingerprint());
                let mut candidate = runs_dir.join(&base);
                let mut n = 1;
                while candidate.exists() {
                    candidate = runs_dir.join(format!("{base}-{n}"));
                    n += 1;
                }
                candidate
            }
        };
        for sub in Self::SUBDIRS {
            let d = root.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let dir = RunDir { root };
        let cfg_path = dir.config_path();
        std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
        Ok(dir)
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn log(&self, name: &str) -> PathBuf {
        self.root.join("logs").join(name)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn image(&self, name: &str) -> PathBuf {
        self.root.join("images").join(name)
    }

    /// The run directory owning a checkpoint at `<run>/checkpoints/<file>`, if any.
    pub fn of_checkpoint(path: &Path) -> Option<Self> {
        let parent = path.parent()?;
        if parent.file_name()? != "checkpoints" {
            return None;
        }
        let root = parent.parent()?.to_path_buf();
        root.join("config.toml").is_file().then_some(RunDir { root })
    }
}
