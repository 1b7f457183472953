use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::rng::rng_for;
use crate::tensor::Tensor;

/// Deterministic per-epoch shuffling and optional horizontal flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchIterator {
    pub len: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub flips: Vec<bool>,
}

impl BatchIterator {
    pub fn new(len: usize, batch_size: usize, seed: u64, flip: bool) -> Self {
        BatchIterator {
            len,
            batch_size: batch_size.max(1),
            seed,
            flip,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.len.div_ceil(self.batch_size)
    }

    /// All batches of `epoch`; the final batch may be short.
    pub fn epoch(&self, epoch: usize) -> Vec<Batch> {
        let mut order: Vec<usize> = (0..self.len).collect();
        order.shuffle(&mut rng_for(self.seed, &[0x5_4FF1E, epoch as u64]));
        let mut flip_rng = rng_for(self.seed, &[0xF11B, epoch as u64]);
        order
            .chunks(self.batch_size)
            .map(|chunk| Batch {
                indices: chunk.to_vec(),
                flips: chunk.iter().map(|_| self.flip && flip_rng.random_bool(0.5)).collect(),
            })
            .collect()
    }
}

/// Mirror every plane of a `BCHW` tensor left to right.
pub fn flip_horizontal(x: &Tensor) -> Result<Tensor> {
    let (_, _, _, w) = x.dims4()?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    Ok(out)
}

/// Gather `batch` from `images`, applying its flips.
pub fn materialize(images: &Tensor, batch: &Batch) -> Result<Tensor> {
    let mut x = images.select(&batch.indices)?;
    let (_, c, h, w) = x.dims4()?;
    let n = c * h * w;
    for (i, &flip) in batch.flips.iter().enumerate() {
        if flip {
            for row in x.data_mut()[i * n..(i + 1) * n].chunks_mut(w) {
                row.reverse();
            }
        }
    }
    Ok(x)
}
