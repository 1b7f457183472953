use crate::error::{Error, Result};
use crate::image_io::{tile, Raster};
use crate::model::{reconstruct, ModelParams};
use crate::optim::{corrupt_sample, corruption_seed, NoiseSpace};
use crate::pyramid::CorruptionSpec;
use crate::tensor::Tensor;

const CHUNK: usize = 256;

/// Corruption applied to every test image before reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalCorruption {
    pub spec: CorruptionSpec,
    pub space: NoiseSpace,
    pub levels: usize,
    pub seed: u64,
}

impl EvalCorruption {
    pub fn apply(&self, images: &Tensor, offset: usize) -> Result<Tensor> {
        let n = images.shape()[0];
        let parts = (0..n)
            .map(|i| {
                let seed = corruption_seed(self.seed, 0, offset + i, 0);
                corrupt_sample(&images.sample(i)?, &self.spec, self.space, self.levels, seed).map(|(t, _)| t)
            })
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&parts)
    }
}

/// Sum of squared differences, accumulated in f64.
pub fn squared_error_sum(z: &Tensor, x: &Tensor) -> Result<f64> {
    if z.shape() != x.shape() {
        return Err(Error::dim(
            "squared_error_sum",
            format!("{:?} vs {:?}", z.shape(), x.shape()),
        ));
    }
    Ok(z.data().iter().zip(x.data()).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum())
}

pub struct ReconOutcome {
    pub mse: f64,
    /// Clean, corrupted and reconstructed rows for the first few samples.
    pub grid: Raster,
}

/// Mean per-pixel squared error between reconstructions of corrupted inputs and the clean images.
pub fn reconstruction_mse(
    params: &ModelParams,
    images: &Tensor,
    corruption: &EvalCorruption,
    grid_samples: usize,
) -> Result<ReconOutcome> {
    let n = images.shape()[0];
    let mut sum = 0.0;
    let mut rows: [Vec<Raster>; 3] = Default::default();
    let mut start = 0;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let clean = images.select(&idx)?;
        let noisy = corruption.apply(&clean, start)?;
        let z = reconstruct(params, &noisy)?;
        sum += squared_error_sum(&z, &clean)?;
        for j in 0..idx.len() {
            if start + j < grid_samples {
                rows[0].push(Raster::from_sample(&clean, j)?);
                rows[1].push(Raster::from_sample(&noisy, j)?);
                rows[2].push(Raster::from_sample(&z, j)?);
            }
        }
        start += idx.len();
    }
    let cols = rows[0].len().max(1);
    let tiles: Vec<Raster> = rows.into_iter().flatten().collect();
    let grid = if tiles.is_empty() {
        Raster::filled(1, 1, 1, 0.0)
    } else {
        tile(&tiles, cols, 1, 1.0)?
    };
    Ok(ReconOutcome {
        mse: sum / images.len() as f64,
        grid,
    })
}
