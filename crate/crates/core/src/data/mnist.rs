use std::path::Path;

use super::{find_file, read_maybe_gz, Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            offset: offset as u64,
            needed: 4,
            len: bytes.len() as u64,
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn check_len(bytes: &[u8], header: usize, payload: usize, path: &Path) -> Result<()> {
    if bytes.len() < header + payload {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: header as u64,
            needed: payload as u64,
            len: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Parse an IDX3 image file into an `N×1×rows×cols` tensor scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Tensor> {
    check_magic(bytes, IDX_IMAGES_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    check_len(bytes, 16, n * rows * cols, path)?;
    let data = bytes[16..16 + n * rows * cols].iter().map(|&b| b as f32 / 255.0).collect();
    Tensor::new(vec![n, 1, rows, cols], data)
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    check_len(bytes, 8, n, path)?;
    Ok(bytes[8..8 + n].to_vec())
}

/// Load one MNIST split from `dir` (`train-*` or `t10k-*`, raw or `.gz`).
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let img_path = find_file(
        dir,
        &[&format!("{prefix}-images-idx3-ubyte"), &format!("{prefix}-images.idx3-ubyte")],
    )?;
    let lbl_path = find_file(
        dir,
        &[&format!("{prefix}-labels-idx1-ubyte"), &format!("{prefix}-labels.idx1-ubyte")],
    )?;
    let labels = parse_idx_labels(&read_maybe_gz(&lbl_path)?, &lbl_path)?;
    let images = parse_idx_images(&read_maybe_gz(&img_path)?, &img_path)?;
    if images.shape()[0] != labels.len() {
        return Err(Error::CountMismatch {
            images: images.shape()[0],
            labels: labels.len(),
        });
    }
    Ok(Dataset {
        name: "mnist".into(),
        split,
        images,
        labels,
    })
}
