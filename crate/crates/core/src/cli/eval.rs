use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::{usage, EvalArgs, RunDir};
use crate::checkpoint::Checkpoint;
use crate::config::{Overrides, RunConfig};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::eval::{
    knn_retrieval, probe_layer, reconstruction_mse, retrieval_grid, EvalCorruption, EvalReport, Metric,
};
use crate::model::extract_embedding;
use crate::optim::NoiseSpace;
use crate::rng::rng_for;

/// Where the report and its images go.
fn outputs(a: &EvalArgs) -> (PathBuf, PathBuf) {
    let stem = a.checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint").to_string();
    match (&a.out, RunDir::of_checkpoint(&a.checkpoint)) {
        (Some(out), _) => {
            let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
            (out.clone(), dir)
        }
        (None, Some(run)) => (run.report(&format!("eval-{stem}.csv")), run.root.join("images")),
        (None, None) => (PathBuf::from(format!("eval-{stem}.csv")), PathBuf::from(".")),
    }
}

fn space_tag(space: NoiseSpace) -> &'static str {
    match space {
        NoiseSpace::Laplacian => "lap",
        NoiseSpace::Spatial => "spatial",
    }
}

pub(crate) fn run(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let mut cfg = match &a.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_toml(&ck.config_toml)?,
    };
    cfg.apply(&Overrides {
        metrics: a.metrics.clone(),
        layers: a.layer.clone(),
        ..a.common.overrides()
    });
    if let Some(k) = a.k {
        cfg.eval.k = k;
    }
    if let Some(d) = &a.distance {
        cfg.eval.distance = d.parse()?;
    }
    let metrics = cfg.eval.metrics()?;
    let layers = cfg.eval.layers()?;
    let cfg = cfg.resolve()?;
    let fp = ck.fingerprint();
    let seed = cfg.eval.seed;
    let params = &ck.params;
    let dir = cfg.data_dir()?;
    let test = cfg.dataset.load(dir, Split::Test)?;
    let (report_path, image_dir) = outputs(&a);
    let mut report = EvalReport::default();

    for metric in metrics {
        match metric {
            Metric::Recon => {
                let spec = cfg.train.corruptions[0];
                for space in [cfg.train.mode.eval_space(), cfg.train.mode.train_space()] {
                    let corruption = EvalCorruption {
                        spec,
                        space,
                        levels: cfg.train.levels,
                        seed,
                    };
                    let out = reconstruction_mse(params, &test.images, &corruption, 10)?;
                    let tag = space_tag(space);
                    out.grid.save(&image_dir.join(format!("recon-{tag}.png")))?;
                    report.push(&format!("recon_mse_{tag}"), "test", "output", out.mse, &fp, seed);
                    if cfg.train.mode.eval_space() == cfg.train.mode.train_space() {
                        break;
                    }
                }
            }
            Metric::Knn => {
                let mut order: Vec<usize> = (0..test.len()).collect();
                order.shuffle(&mut rng_for(seed, &[0x4E4E]));
                order.truncate(cfg.eval.queries.min(test.len()));
                for &layer in &layers {
                    let emb = extract_embedding(params, &test.images, layer, Some(cfg.eval.feature_budget))?;
                    let r = knn_retrieval(&emb, &test.labels, &order, cfg.eval.k, cfg.eval.distance)?;
                    let shown = r.queries.len().min(cfg.eval.grid_queries);
                    let subset = crate::eval::KnnResult {
                        queries: r.queries[..shown].to_vec(),
                        neighbors: r.neighbors[..shown].to_vec(),
                        ..r.clone()
                    };
                    if shown > 0 {
                        retrieval_grid(&test.images, &test.labels, &subset)?
                            .save(&image_dir.join(format!("retrieval-{layer}.png")))?;
                    }
                    report.push(&format!("knn_p@{}", cfg.eval.k), "test", &layer.to_string(), r.precision, &fp, seed);
                }
            }
            Metric::Probe => {
                let mut train = cfg.dataset.load(dir, Split::Train)?;
                if let Some(n) = a.subset {
                    train = train.take(n)?;
                }
                for &layer in &layers {
                    let r = probe_layer(
                        params,
                        &train.images,
                        &train.labels,
                        &test.images,
                        &test.labels,
                        layer,
                        cfg.eval.feature_budget,
                        &cfg.eval.probe(),
                    )?;
                    report.push("probe_top1", "test", &layer.to_string(), r.accuracy, &fp, seed);
                }
            }
        }
    }

    print!("{}", report.table());
    if let Some(d) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| Error::io(&report_path, e))?;
    std::fs::write(&report_path, buf).map_err(|e| Error::io(&report_path, e))?;
    let cfg_path = report_path.with_extension("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    if report.entries.is_empty() {
        return Err(usage("no metrics selected"));
    }
    println!("{}", report_path.display());
    Ok(())
}
