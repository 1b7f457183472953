use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::data::{materialize, BatchIterator};
use crate::error::{Error, Result};
use crate::model::{forward_on_tape, reconstruct, ModelParams};
use crate::pyramid::{lap_corrupt, max_levels, spatial_corrupt, CorruptionSpec};
use crate::rng::derive_seed;
use crate::tape::{GradTape, Gradients};
use crate::tensor::Tensor;

const CORRUPT_STREAM: u64 = 0xC0_44_07;

/// Samples per tape pass; bounds activation memory without changing the objective.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSpace {
    Laplacian,
    Spatial,
}

/// Training arm. The two cross modes train in one space and are evaluated in the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lapdae,
    DaeSpatial,
    DaeOnLapNoise,
    LapdaeOnSpatialNoise,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Lapdae, Mode::DaeSpatial, Mode::DaeOnLapNoise, Mode::LapdaeOnSpatialNoise];

    pub fn train_space(self) -> NoiseSpace {
        match self {
            Mode::Lapdae | Mode::LapdaeOnSpatialNoise => NoiseSpace::Laplacian,
            Mode::DaeSpatial | Mode::DaeOnLapNoise => NoiseSpace::Spatial,
        }
    }

    pub fn eval_space(self) -> NoiseSpace {
        match self {
            Mode::Lapdae | Mode::DaeOnLapNoise => NoiseSpace::Laplacian,
            Mode::DaeSpatial | Mode::LapdaeOnSpatialNoise => NoiseSpace::Spatial,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lapdae => "lapdae",
            Mode::DaeSpatial => "dae_spatial",
            Mode::DaeOnLapNoise => "dae_on_lap_noise",
            Mode::LapdaeOnSpatialNoise => "lapdae_on_spatial_noise",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Mode::ALL.iter().map(|m| m.as_str()).collect();
            Error::Usage(format!("unknown mode `{s}`; valid modes: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every_epochs: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// The corruption set; each entry yields one corrupted copy of every sample.
    pub corruptions: Vec<CorruptionSpec>,
    pub levels: usize,
    pub mode: Mode,
    pub seed: u64,
    pub flip: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 1e-4,
            lr_decay_factor: 0.1,
            lr_decay_every_epochs: 20,
            batch_size: 128,
            epochs: 30,
            corruptions: vec![CorruptionSpec::default()],
            levels: 5,
            mode: Mode::Lapdae,
            seed: 0,
            flip: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if self.lr_decay_factor.is_nan() || self.lr_decay_factor <= 0.0 {
            return bad(format!("lr_decay_factor must be positive, got {}", self.lr_decay_factor));
        }
        if self.lr_decay_every_epochs == 0 {
            return bad("lr_decay_every_epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.corruptions.is_empty() {
            return bad("the corruption set is empty".into());
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        for spec in &self.corruptions {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.base_lr * cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every_epochs) as i32)
}

/// One corrupted copy of a single `1×C×H×W` sample. The level is `None` for pixel-space noise.
pub fn corrupt_sample(
    x: &Tensor,
    spec: &CorruptionSpec,
    space: NoiseSpace,
    levels: usize,
    seed: u64,
) -> Result<(Tensor, Option<usize>)> {
    match space {
        NoiseSpace::Laplacian => {
            let (out, level) = lap_corrupt(x, &spec.with_seed(seed), levels)?;
            Ok((out, Some(level)))
        }
        NoiseSpace::Spatial => Ok((spatial_corrupt(x, spec.sigma, seed)?, None)),
    }
}

/// Seed of the corruption applied to dataset sample `index` by set member `c` in `epoch`.
pub fn corruption_seed(seed: u64, epoch: usize, index: usize, c: usize) -> u64 {
    derive_seed(seed, &[CORRUPT_STREAM, epoch as u64, index as u64, c as u64])
}

/// The sub-mini-batch: `|C|` corrupted copies of `clean`, stacked member-major.
pub struct CorruptedBatch {
    pub inputs: Tensor,
    pub levels: Vec<Option<usize>>,
}

pub fn corrupt_batch(
    clean: &Tensor,
    indices: &[usize],
    epoch: usize,
    cfg: &TrainConfig,
    space: NoiseSpace,
) -> Result<CorruptedBatch> {
    let b = clean.shape()[0];
    if indices.len() != b {
        return Err(Error::dim(
            "corrupt_batch",
            format!("{} indices for a batch of {b}", indices.len()),
        ));
    }
    let mut parts = Vec::with_capacity(b * cfg.corruptions.len());
    let mut levels = Vec::with_capacity(parts.capacity());
    for (c, spec) in cfg.corruptions.iter().enumerate() {
        for (i, &index) in indices.iter().enumerate() {
            let sample = clean.sample(i)?;
            let (out, level) = corrupt_sample(&sample, spec, space, cfg.levels, corruption_seed(cfg.seed, epoch, index, c))?;
            parts.push(out);
            levels.push(level);
        }
    }
    Ok(CorruptedBatch {
        inputs: Tensor::stack(&parts)?,
        levels,
    })
}

/// Loss and gradients of `Σ_c mean ‖x − z_c‖²` for one sub-mini-batch.
///
/// `inputs` holds `copies` corrupted versions of `clean`, member-major.
pub fn step_gradients(params: &ModelParams, clean: &Tensor, inputs: &Tensor, copies: usize) -> Result<(f64, Gradients)> {
    let b = clean.shape()[0];
    if inputs.shape()[0] != b * copies || inputs.shape()[1..] != clean.shape()[1..] {
        return Err(Error::dim(
            "step_gradients",
            format!("inputs {:?} are not {copies} copies of {:?}", inputs.shape(), clean.shape()),
        ));
    }
    let total = b * copies;
    let mut loss = 0.0;
    let mut grads = Gradients::default();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let idx: Vec<usize> = (start..end).collect();
        let target_idx: Vec<usize> = idx.iter().map(|&j| j % b).collect();
        let share = (end - start) as f64 / total as f64;
        let mut tape = GradTape::new();
        let x = tape.input(inputs.select(&idx)?);
        let t = tape.input(clean.select(&target_idx)?);
        let fwd = forward_on_tape(params, &mut tape, x)?;
        let l = tape.mse(fwd.output, t, copies as f64 * share)?;
        loss += tape.scalar(l).unwrap_or(f64::NAN);
        grads.merge(tape.backward(l)?)?;
        start = end;
    }
    Ok((loss, grads))
}

/// Mean per-pixel squared error of the model's reconstruction of clean inputs.
pub fn clean_reconstruction_mse(params: &ModelParams, images: &Tensor) -> Result<f64> {
    let n = images.shape()[0];
    let mut acc = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + 256).min(n);
        let x = images.select(&(start..end).collect::<Vec<_>>())?;
        let z = reconstruct(params, &x)?;
        acc += z
            .data()
            .iter()
            .zip(x.data())
            .map(|(&a, &b)| ((a - b) as f64).powi(2))
            .sum::<f64>();
        start = end;
    }
    Ok(acc / images.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    pub epoch: usize,
    pub mode: Mode,
    pub loss: f64,
    pub lr: f64,
    pub levels: Vec<Option<usize>>,
}

pub const LOSS_CSV_HEADER: &str = "iter,epoch,mode,loss,lr,level";

impl LossRecord {
    /// Realized corruption levels, `;`-separated; `-` marks pixel-space noise.
    pub fn level_field(&self) -> String {
        self.levels
            .iter()
            .map(|l| l.map_or_else(|| "-".to_string(), |l| l.to_string()))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{}",
            self.iter,
            self.epoch,
            self.mode,
            self.loss,
            self.lr,
            self.level_field()
        )
    }
}

pub fn write_loss_csv(records: &[LossRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{LOSS_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Held-out clean reconstruction error after `epoch` completed epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutRecord {
    pub epoch: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub losses: Vec<LossRecord>,
    pub holdout: Vec<HoldoutRecord>,
}

/// Hooks for streaming logs and checkpointing while training runs.
pub trait TrainObserver {
    fn on_iteration(&mut self, _record: &LossRecord) -> Result<()> {
        Ok(())
    }

    fn on_holdout(&mut self, _record: &HoldoutRecord) -> Result<()> {
        Ok(())
    }

    /// Called with the parameters and optimizer state after every epoch.
    fn on_epoch_end(&mut self, _epoch: usize, _params: &ModelParams, _state: &AdamState) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Train on `images` for `cfg.epochs` epochs; labels never enter here.
///
/// On a non-finite loss the step is skipped and an error returned, leaving
/// `params` and `state` at their last good values.
pub fn train(
    params: &mut ModelParams,
    state: &mut AdamState,
    images: &Tensor,
    holdout: Option<&Tensor>,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainLog> {
    cfg.validate()?;
    let (n, c, h, w) = images.dims4()?;
    params.arch().check_input(c, h, w)?;
    if cfg.levels > max_levels(h, w) {
        log::warn!(
            "{} pyramid levels requested but {h}x{w} images support {}; using {}",
            cfg.levels,
            max_levels(h, w),
            max_levels(h, w)
        );
    }
    let mut log = TrainLog::default();
    let record_holdout = |epoch: usize, params: &ModelParams, log: &mut TrainLog, obs: &mut dyn TrainObserver| {
        if let Some(hold) = holdout {
            let rec = HoldoutRecord {
                epoch,
                mse: clean_reconstruction_mse(params, hold)?,
            };
            obs.on_holdout(&rec)?;
            log.holdout.push(rec);
        }
        Ok::<(), Error>(())
    };
    record_holdout(0, params, &mut log, observer)?;
    let batches = BatchIterator::new(n, cfg.batch_size, cfg.seed, cfg.flip);
    let space = cfg.mode.train_space();
    let mut iter = 0;
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        for batch in batches.epoch(epoch) {
            let clean = materialize(images, &batch)?;
            let corrupted = corrupt_batch(&clean, &batch.indices, epoch, cfg, space)?;
            let (loss, grads) = step_gradients(params, &clean, &corrupted.inputs, cfg.corruptions.len())?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: iter });
            }
            adam_step(params, &grads, state, lr)?;
            let rec = LossRecord {
                iter,
                epoch,
                mode: cfg.mode,
                loss,
                lr,
                levels: corrupted.levels,
            };
            observer.on_iteration(&rec)?;
            log.losses.push(rec);
            iter += 1;
        }
        record_holdout(epoch + 1, params, &mut log, observer)?;
        observer.on_epoch_end(epoch, params, state)?;
    }
    Ok(log)
}
