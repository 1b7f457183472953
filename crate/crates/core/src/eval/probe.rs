use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::kernels::gemm;
use crate::model::{extract_embedding, EmbeddingLayer, Embeddings, ModelParams};
use crate::optim::{AdamConfig, AdamState};
use crate::rng::rng_for;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 20,
            lr: 1e-3,
            batch_size: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub dim: usize,
}

/// Per-feature mean and reciprocal std from the training rows; constant features get unit scale.
fn standardizer(emb: &Embeddings) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (emb.n as f64, emb.dim);
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for i in 0..emb.n {
        for (j, &v) in emb.row(i).iter().enumerate() {
            mean[j] += v as f64;
            sq[j] += (v as f64).powi(2);
        }
    }
    let inv_std = mean
        .iter_mut()
        .zip(&sq)
        .map(|(m, &s)| {
            *m /= n;
            let var = (s / n - *m * *m).max(0.0);
            if var > 1e-12 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, inv_std)
}

fn standardized_rows(emb: &Embeddings, rows: &[usize], mean: &[f64], inv_std: &[f64]) -> Vec<f32> {
    let mut out = Vec::with_capacity(rows.len() * emb.dim);
    for &i in rows {
        out.extend(
            emb.row(i)
                .iter()
                .zip(mean.iter().zip(inv_std))
                .map(|(&v, (&m, &s))| ((v as f64 - m) * s) as f32),
        );
    }
    out
}

fn logits(x: &[f32], rows: usize, dim: usize, w: &[f32], b: &[f32], classes: usize) -> Vec<f32> {
    let mut out: Vec<f32> = (0..rows).flat_map(|_| b.iter().copied()).collect();
    gemm(rows, dim, classes, x, false, w, true, 1.0, &mut out);
    out
}

fn argmax(row: &[f32]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn accuracy(
    emb: &Embeddings,
    labels: &[u8],
    (mean, inv_std): (&[f64], &[f64]),
    w: &[f32],
    b: &[f32],
    classes: usize,
) -> f64 {
    let mut correct = 0;
    for start in (0..emb.n).step_by(512) {
        let rows: Vec<usize> = (start..(start + 512).min(emb.n)).collect();
        let x = standardized_rows(emb, &rows, mean, inv_std);
        let z = logits(&x, rows.len(), emb.dim, w, b, classes);
        correct += rows
            .iter()
            .zip(z.chunks(classes))
            .filter(|(&i, zr)| argmax(zr) == labels[i] as usize)
            .count();
    }
    correct as f64 / emb.n.max(1) as f64
}

/// Multinomial logistic regression on frozen features, scored by top-1 test accuracy.
pub fn linear_probe(
    train: &Embeddings,
    train_labels: &[u8],
    test: &Embeddings,
    test_labels: &[u8],
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    if train.dim != test.dim {
        return Err(Error::dim("linear_probe", format!("train dim {} vs test dim {}", train.dim, test.dim)));
    }
    for (e, l) in [(train, train_labels), (test, test_labels)] {
        if e.n != l.len() {
            return Err(Error::CountMismatch {
                images: e.n,
                labels: l.len(),
            });
        }
    }
    if train.n == 0 {
        return Err(Error::InvalidArgument("linear probe needs training rows".into()));
    }
    let classes = train_labels.iter().chain(test_labels).map(|&l| l as usize + 1).max().unwrap_or(1);
    let dim = train.dim;
    let (mean, inv_std) = standardizer(train);
    let mut w = vec![0.0f32; classes * dim];
    let mut b = vec![0.0f32; classes];
    let shapes = [vec![classes, dim], vec![classes]];
    let mut adam = AdamState::new(shapes.iter().map(|s| s.as_slice()), AdamConfig::default());
    let mut order: Vec<usize> = (0..train.n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng_for(cfg.seed, &[0x9_80BE, epoch as u64]));
        for rows in order.chunks(cfg.batch_size.max(1)) {
            let bsz = rows.len();
            let x = standardized_rows(train, rows, &mean, &inv_std);
            let mut g = logits(&x, bsz, dim, &w, &b, classes);
            for (r, zr) in g.chunks_mut(classes).enumerate() {
                let m = zr.iter().fold(f32::NEG_INFINITY, |a, &v| a.max(v));
                let mut total = 0.0f32;
                for v in zr.iter_mut() {
                    *v = (*v - m).exp();
                    total += *v;
                }
                for v in zr.iter_mut() {
                    *v /= total * bsz as f32;
                }
                zr[train_labels[rows[r]] as usize] -= 1.0 / bsz as f32;
            }
            let mut gw = vec![0.0f32; classes * dim];
            gemm(classes, bsz, dim, &g, true, &x, false, 0.0, &mut gw);
            let mut gb = vec![0.0f32; classes];
            for zr in g.chunks(classes) {
                gb.iter_mut().zip(zr).for_each(|(a, &v)| *a += v);
            }
            adam.step_slices(&mut [&mut w, &mut b], &[&gw, &gb], cfg.lr)?;
        }
    }
    let stats = (mean.as_slice(), inv_std.as_slice());
    Ok(ProbeResult {
        accuracy: accuracy(test, test_labels, stats, &w, &b, classes),
        train_accuracy: accuracy(train, train_labels, stats, &w, &b, classes),
        dim,
    })
}

/// Probe `layer` of a frozen backbone; fails if the backbone changed underneath.
#[allow(clippy::too_many_arguments)]
pub fn probe_layer(
    params: &ModelParams,
    train_images: &Tensor,
    train_labels: &[u8],
    test_images: &Tensor,
    test_labels: &[u8],
    layer: EmbeddingLayer,
    budget: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    let before = params.fingerprint();
    let train = extract_embedding(params, train_images, layer, Some(budget))?;
    let test = extract_embedding(params, test_images, layer, Some(budget))?;
    let result = linear_probe(&train, train_labels, &test, test_labels, cfg)?;
    let after = params.fingerprint();
    if before != after {
        return Err(Error::InvalidArgument(format!(
            "backbone changed during probing ({before} -> {after})"
        )));
    }
    Ok(result)
}
