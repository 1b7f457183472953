//! Run configuration files and their fingerprints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::eval::{Distance, Metric, ProbeConfig};
use crate::model::{Architecture, EmbeddingLayer, DEFAULT_FEATURE_BUDGET};
use crate::optim::{Mode, TrainConfig};

pub const DATA_DIR_ENV: &str = "LAPDAE_DATA_DIR";

/// First 12 hex digits of the SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    #[default]
    Lapdae,
    Tiny,
}

impl ArchKind {
    pub fn build(self, in_channels: usize) -> Architecture {
        match self {
            ArchKind::Lapdae => Architecture::lapdae(in_channels),
            ArchKind::Tiny => Architecture::tiny(in_channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub metrics: Vec<String>,
    /// Layer list or range such as `conv1..bottleneck`.
    pub layers: String,
    pub k: usize,
    pub distance: Distance,
    /// Number of test images used as retrieval queries.
    pub queries: usize,
    /// Queries drawn into the retrieval grid.
    pub grid_queries: usize,
    pub feature_budget: usize,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            metrics: vec!["recon".into(), "knn".into(), "probe".into()],
            layers: "bottleneck".into(),
            k: 5,
            distance: Distance::Euclidean,
            queries: 1000,
            grid_queries: 10,
            feature_budget: DEFAULT_FEATURE_BUDGET,
            probe_epochs: 20,
            probe_lr: 1e-3,
            seed: 0,
        }
    }
}

impl EvalSection {
    pub fn metrics(&self) -> Result<Vec<Metric>> {
        self.metrics.iter().map(|m| m.parse()).collect()
    }

    pub fn layers(&self) -> Result<Vec<EmbeddingLayer>> {
        EmbeddingLayer::parse_range(&self.layers)
    }

    pub fn probe(&self) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe_epochs,
            lr: self.probe_lr,
            seed: self.seed,
            ..ProbeConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub data_dir: Option<PathBuf>,
    /// Train on the first `subset` training images only.
    pub subset: Option<usize>,
    /// Test images held out for the per-epoch clean reconstruction curve.
    pub holdout: usize,
    /// Flip MNIST digits too; CIFAR is always flipped.
    pub mnist_flip: bool,
    pub arch: ArchKind,
    pub checkpoint_every: usize,
    pub runs_dir: PathBuf,
    pub init_seed: Option<u64>,
    pub train: TrainConfig,
    pub eval: EvalSection,
    /// Set once the epoch count comes from a file or flag rather than the
    /// dataset default.
    #[serde(skip)]
    epochs_pinned: Pinned,
}

/// Records where a value came from; two configs with equal fields compare
/// equal whatever their provenance.
#[derive(Debug, Clone, Copy, Default)]
struct Pinned(bool);

impl PartialEq for Pinned {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetKind::Mnist,
            data_dir: None,
            subset: None,
            holdout: 500,
            mnist_flip: false,
            arch: ArchKind::Lapdae,
            checkpoint_every: 5,
            runs_dir: PathBuf::from("runs"),
            init_seed: None,
            train: TrainConfig {
                epochs: DatasetKind::Mnist.default_epochs(),
                ..TrainConfig::default()
            },
            eval: EvalSection::default(),
            epochs_pinned: Pinned(false),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<DatasetKind>,
    pub data_dir: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub sigma: Option<f32>,
    pub levels: Option<usize>,
    pub subset: Option<usize>,
    pub mnist_flip: bool,
    pub metrics: Option<String>,
    pub layers: Option<String>,
    pub runs_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let pinned = table.get("train").and_then(|t| t.get("epochs")).is_some();
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.epochs_pinned = Pinned(pinned);
        if !pinned {
            cfg.train.epochs = cfg.dataset.default_epochs();
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self.to_toml().as_bytes())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = o.dataset {
            self.dataset = d;
            if !self.epochs_pinned.0 {
                self.train.epochs = d.default_epochs();
            }
        }
        if let Some(d) = &o.data_dir {
            self.data_dir = Some(d.clone());
        }
        if let Some(m) = o.mode {
            self.train.mode = m;
        }
        if let Some(s) = o.seed {
            self.train.seed = s;
            self.eval.seed = s;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
            self.epochs_pinned = Pinned(true);
        }
        if let Some(b) = o.batch_size {
            self.train.batch_size = b;
        }
        if let Some(sigma) = o.sigma {
            self.train.corruptions.iter_mut().for_each(|c| c.sigma = sigma);
        }
        if let Some(l) = o.levels {
            self.train.levels = l;
        }
        if let Some(s) = o.subset {
            self.subset = Some(s);
        }
        if o.mnist_flip {
            self.mnist_flip = true;
        }
        if let Some(m) = &o.metrics {
            self.eval.metrics = m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(l) = &o.layers {
            self.eval.layers = l.clone();
        }
        if let Some(r) = &o.runs_dir {
            self.runs_dir = r.clone();
        }
    }

    /// Fill derived fields and check everything that can fail before any compute.
    pub fn resolve(mut self) -> Result<Self> {
        if self.data_dir.is_none() {
            self.data_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        }
        self.train.flip = match self.dataset {
            DatasetKind::Cifar10 => true,
            DatasetKind::Mnist => self.mnist_flip,
        };
        self.train.validate()?;
        self.eval.metrics().map_err(|e| Error::Config(e.to_string()))?;
        self.eval.layers().map_err(|e| Error::Config(e.to_string()))?;
        if self.eval.k == 0 {
            return Err(Error::Config("eval.k must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        self.architecture().validate()?;
        Ok(self)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch.build(self.dataset.channels())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data_dir.as_deref().ok_or_else(|| {
            Error::MissingData(PathBuf::from(format!("<no --data-dir given and {DATA_DIR_ENV} unset>")))
        })
    }
}
