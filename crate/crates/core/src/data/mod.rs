//! Dataset ingestion: MNIST IDX files and CIFAR-10 binary batches.

mod cifar;
mod iter;
mod mnist;

pub use cifar::{load_cifar10, CIFAR_RECORD_BYTES};
pub use iter::{flip_horizontal, materialize, Batch, BatchIterator};
pub use mnist::{load_mnist, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

impl DatasetKind {
    pub fn channels(self) -> usize {
        match self {
            DatasetKind::Mnist => 1,
            DatasetKind::Cifar10 => 3,
        }
    }

    /// Training epochs when the configuration does not pin a count.
    pub fn default_epochs(self) -> usize {
        match self {
            DatasetKind::Mnist => 30,
            DatasetKind::Cifar10 => 50,
        }
    }

    /// Canonical split sizes of the full archives.
    pub fn canonical_len(self, split: Split) -> usize {
        match (self, split) {
            (DatasetKind::Mnist, Split::Train) => 60_000,
            (DatasetKind::Mnist, Split::Test) => 10_000,
            (DatasetKind::Cifar10, Split::Train) => 50_000,
            (DatasetKind::Cifar10, Split::Test) => 10_000,
        }
    }

    pub fn load(self, data_dir: &Path, split: Split) -> Result<Dataset> {
        match self {
            DatasetKind::Mnist => load_mnist(&resolve_dir(data_dir, &["mnist", "MNIST/raw", "MNIST"])?, split),
            DatasetKind::Cifar10 => load_cifar10(
                &resolve_dir(data_dir, &["cifar-10-batches-bin", "cifar10/cifar-10-batches-bin", "cifar10"])?,
                split,
            ),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            _ => Err(Error::Usage(format!("unknown dataset `{s}`; expected mnist or cifar10"))),
        }
    }
}

/// Images in `[0, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub images: Tensor,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` samples (or all of them if fewer).
    pub fn take(&self, n: usize) -> Result<Dataset> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            name: self.name.clone(),
            split: self.split,
            images: self.images.select(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }
}

/// First existing candidate directory below `root`, or `root` itself.
fn resolve_dir(root: &Path, candidates: &[&str]) -> Result<PathBuf> {
    if !root.is_dir() {
        return Err(Error::MissingData(root.to_path_buf()));
    }
    Ok(candidates
        .iter()
        .map(|c| root.join(c))
        .find(|p| p.is_dir())
        .unwrap_or_else(|| root.to_path_buf()))
}

/// Read a file, transparently gunzipping `.gz` paths.
pub(crate) fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// First of `names` (each tried raw and gzipped) that exists in `dir`.
pub(crate) fn find_file(dir: &Path, names: &[&str]) -> Result<PathBuf> {
    names
        .iter()
        .flat_map(|n| [dir.join(n), dir.join(format!("{n}.gz"))])
        .find(|p| p.is_file())
        .ok_or_else(|| Error::MissingData(dir.join(names[0])))
}
