use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image_io::{tile, Raster};
use crate::model::{Embeddings, ModelParams};

pub const KERNEL_GRID_COLUMNS: usize = 8;

/// Write one `label\tf0\tf1…` row per sample after two header lines.
///
/// Values use the shortest representation that parses back to the same `f32`.
pub fn export_embeddings(emb: &Embeddings, labels: &[u8], fingerprint: &str, path: &Path) -> Result<()> {
    if labels.len() != emb.n {
        return Err(Error::CountMismatch {
            images: emb.n,
            labels: labels.len(),
        });
    }
    let io = |e| Error::io(path, e);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "# layer={} checkpoint={fingerprint} n={} dim={}", emb.layer, emb.n, emb.dim).map_err(io)?;
    let mut header = String::from("label");
    for j in 0..emb.dim {
        header.push_str(&format!("\tf{j}"));
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for (i, &label) in labels.iter().enumerate() {
        line.clear();
        line.push_str(&label.to_string());
        for v in emb.row(i) {
            line.push('\t');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Parsed embedding export: metadata, labels and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingExport {
    pub layer: String,
    pub fingerprint: String,
    pub labels: Vec<u8>,
    pub dim: usize,
    pub data: Vec<f32>,
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingExport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: String| Error::Format(format!("{}: {what}", path.display()));
    let mut lines = BufReader::new(file).lines();
    let meta = lines.next().ok_or_else(|| bad("empty file".into()))?.map_err(|e| Error::io(path, e))?;
    let field = |key: &str| {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("header lacks `{key}`")))
    };
    let (layer, fingerprint) = (field("layer")?, field("checkpoint")?);
    let dim: usize = field("dim")?.parse().map_err(|_| bad("bad dim".into()))?;
    lines.next();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut cols = line.split('\t');
        let label = cols.next().and_then(|l| l.parse().ok()).ok_or_else(|| bad(format!("row {row}: bad label")))?;
        let before = data.len();
        for c in cols {
            data.push(c.parse::<f32>().map_err(|_| bad(format!("row {row}: bad value `{c}`")))?);
        }
        if data.len() - before != dim {
            return Err(bad(format!("row {row} has {} features, expected {dim}", data.len() - before)));
        }
        labels.push(label);
    }
    Ok(EmbeddingExport {
        layer,
        fingerprint,
        labels,
        dim,
        data,
    })
}

/// Min-max normalize one kernel across all its input channels; a flat kernel maps to 0.5.
fn kernel_tile(weights: &[f32], channels: usize, k: usize) -> Raster {
    let (lo, hi) = weights.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let data = weights
        .iter()
        .map(|&v| if range > 0.0 { (v - lo) / range } else { 0.5 })
        .collect();
    // Gray tiles for one input channel, color for three; otherwise show the channel mean.
    let mut r = Raster {
        channels,
        height: k,
        width: k,
        data,
    };
    if channels != 1 && channels != 3 {
        let plane = k * k;
        let mean = (0..plane)
            .map(|p| (0..channels).map(|c| r.data[c * plane + p]).sum::<f32>() / channels as f32)
            .collect();
        r = Raster {
            channels: 1,
            height: k,
            width: k,
            data: mean,
        };
    }
    r
}

/// Tile the first conv layer's kernels, 8 per row with 1-px white gutters.
pub fn first_layer_kernel_grid(params: &ModelParams) -> Result<Raster> {
    let (_, w) = params
        .tensors()
        .first()
        .ok_or_else(|| Error::InvalidArgument("model has no layers".into()))?;
    let [o, i, k, _] = w.shape()[..] else {
        return Err(Error::dim("kernel grid", format!("first weight has shape {:?}", w.shape())));
    };
    let tiles: Vec<Raster> = w.data().chunks(i * k * k).map(|kw| kernel_tile(kw, i, k)).collect();
    debug_assert_eq!(tiles.len(), o);
    tile(&tiles, KERNEL_GRID_COLUMNS, 1, 1.0)
}

pub fn dump_first_layer_kernels(params: &ModelParams, path: &Path) -> Result<Raster> {
    let grid = first_layer_kernel_grid(params)?;
    grid.save(path)?;
    Ok(grid)
}
