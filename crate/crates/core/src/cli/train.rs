use std::fs::File;
use std::io::{BufWriter, Write};

use super::{RunDir, TrainArgs};
use crate::checkpoint::Checkpoint;
use crate::config::{Overrides, RunConfig};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::optim::{train, AdamState, HoldoutRecord, LossRecord, TrainObserver, LOSS_CSV_HEADER};
use std::path::Path;

/// Training data plus the held-out clean-reconstruction batch.
pub(crate) struct Prepared {
    pub train: Dataset,
    pub holdout: Option<Dataset>,
}

pub(crate) fn prepare_data(cfg: &RunConfig) -> Result<Prepared> {
    let dir = cfg.data_dir()?;
    if !dir.is_dir() {
        return Err(Error::MissingData(dir.to_path_buf()));
    }
    let mut train = cfg.dataset.load(dir, Split::Train)?;
    if let Some(n) = cfg.subset {
        train = train.take(n)?;
    }
    let holdout = if cfg.holdout > 0 {
        Some(cfg.dataset.load(dir, Split::Test)?.take(cfg.holdout)?)
    } else {
        None
    };
    Ok(Prepared { train, holdout })
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

struct RunObserver<'a> {
    dir: &'a RunDir,
    config_toml: String,
    every: usize,
    epochs: usize,
    losses: BufWriter<File>,
    holdout: BufWriter<File>,
    last_good: Option<Checkpoint>,
}

impl TrainObserver for RunObserver<'_> {
    fn on_iteration(&mut self, r: &LossRecord) -> Result<()> {
        let path = self.dir.log("loss.csv");
        writeln!(self.losses, "{}", r.csv_row()).map_err(|e| Error::io(path, e))?;
        if r.iter.is_multiple_of(50) {
            log::info!("iter {} epoch {} loss {:.6} lr {:e}", r.iter, r.epoch, r.loss, r.lr);
        }
        Ok(())
    }

    fn on_holdout(&mut self, r: &HoldoutRecord) -> Result<()> {
        let path = self.dir.log("holdout.csv");
        writeln!(self.holdout, "{},{:e}", r.epoch, r.mse).map_err(|e| Error::io(&path, e))?;
        self.holdout.flush().map_err(|e| Error::io(&path, e))?;
        log::info!("epoch {} held-out clean reconstruction mse {:.6}", r.epoch, r.mse);
        Ok(())
    }

    fn on_epoch_end(&mut self, epoch: usize, params: &ModelParams, state: &AdamState) -> Result<()> {
        let done = epoch + 1;
        let ck = Checkpoint::new(params.clone(), Some(state.clone()), done as u64, self.config_toml.clone());
        if done.is_multiple_of(self.every) || done == self.epochs {
            ck.save(&self.dir.checkpoint(&format!("epoch-{done:04}.lapd")))?;
        }
        self.losses.flush().map_err(|e| Error::io(self.dir.log("loss.csv"), e))?;
        self.last_good = Some(ck);
        Ok(())
    }
}

pub(crate) fn run(a: TrainArgs) -> Result<()> {
    let mut cfg = a.common.base_config()?;
    cfg.apply(&Overrides {
        mode: a.mode,
        epochs: a.epochs,
        batch_size: a.batch_size,
        sigma: a.sigma,
        levels: a.levels,
        subset: a.subset,
        mnist_flip: a.mnist_flip,
        ..a.common.overrides()
    });
    let cfg = cfg.resolve()?;
    let data = prepare_data(&cfg)?;
    let arch = cfg.architecture();
    let (_, c, h, w) = data.train.images.dims4()?;
    arch.check_input(c, h, w)?;

    let dir = RunDir::create(&cfg, &cfg.runs_dir, a.out.as_deref())?;
    let config_toml = cfg.to_toml();
    let mut params = ModelParams::init(&arch, cfg.init_seed.unwrap_or(cfg.train.seed))?;
    let mut state = AdamState::for_params(&params);
    log::info!(
        "run {} | mode {} | {} training images | {} epochs",
        dir.root.display(),
        cfg.train.mode,
        data.train.len(),
        cfg.train.epochs
    );
    let initial = Checkpoint::new(params.clone(), Some(state.clone()), 0, config_toml.clone());
    initial.save(&dir.checkpoint("epoch-0000.lapd"))?;

    let mut losses = create_writer(&dir.log("loss.csv"))?;
    writeln!(losses, "{LOSS_CSV_HEADER}").map_err(|e| Error::io(dir.log("loss.csv"), e))?;
    let mut holdout = create_writer(&dir.log("holdout.csv"))?;
    writeln!(holdout, "epoch,clean_recon_mse").map_err(|e| Error::io(dir.log("holdout.csv"), e))?;
    let mut obs = RunObserver {
        dir: &dir,
        config_toml: config_toml.clone(),
        every: cfg.checkpoint_every,
        epochs: cfg.train.epochs,
        losses,
        holdout,
        last_good: None,
    };
    let outcome = train(
        &mut params,
        &mut state,
        &data.train.images,
        data.holdout.as_ref().map(|d| &d.images),
        &cfg.train,
        &mut obs,
    );
    obs.losses.flush().map_err(|e| Error::io(dir.log("loss.csv"), e))?;
    if let Err(e) = outcome {
        if matches!(e, Error::NonFiniteLoss { .. }) {
            let ck = obs.last_good.take().unwrap_or(initial);
            ck.save(&dir.checkpoint("last-good.lapd"))?;
            log::error!("training halted; last good checkpoint kept at epoch {}", ck.epoch);
        }
        return Err(e);
    }
    let last = Checkpoint::new(params, Some(state), cfg.train.epochs as u64, config_toml);
    last.save(&dir.checkpoint("final.lapd"))?;
    println!("{}", dir.root.display());
    Ok(())
}
