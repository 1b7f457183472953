use std::path::Path;

use super::{find_file, read_maybe_gz, Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One label byte followed by 1024 R, 1024 G and 1024 B bytes.
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * 32 * 32;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];

fn parse_batch(bytes: &[u8], path: &Path, pixels: &mut Vec<f32>, labels: &mut Vec<u8>) -> Result<()> {
    let whole = bytes.len() / CIFAR_RECORD_BYTES * CIFAR_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: whole as u64,
            needed: CIFAR_RECORD_BYTES as u64,
            len: bytes.len() as u64,
        });
    }
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        labels.push(rec[0]);
        pixels.extend(rec[1..].iter().map(|&b| b as f32 / 255.0));
    }
    Ok(())
}

/// Load a CIFAR-10 split from the binary-version batch files in `dir`.
///
/// Channel planes keep their on-disk R, G, B order.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Dataset> {
    let files: Vec<&str> = match split {
        Split::Train => TRAIN_FILES.to_vec(),
        Split::Test => vec!["test_batch.bin"],
    };
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for name in files {
        let path = find_file(dir, &[name])?;
        parse_batch(&read_maybe_gz(&path)?, &path, &mut pixels, &mut labels)?;
    }
    if labels.is_empty() {
        return Err(Error::MissingData(dir.to_path_buf()));
    }
    let images = Tensor::new(vec![labels.len(), 3, 32, 32], pixels)?;
    Ok(Dataset {
        name: "cifar10".into(),
        split,
        images,
        labels,
    })
}
