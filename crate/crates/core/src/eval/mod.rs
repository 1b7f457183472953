//! Reconstruction error, retrieval, linear probes and exporters.

mod export;
mod knn;
mod probe;
mod recon;

pub use export::{
    dump_first_layer_kernels, export_embeddings, first_layer_kernel_grid, read_embeddings, EmbeddingExport,
    KERNEL_GRID_COLUMNS,
};
pub use knn::{knn_retrieval, Distance, KnnResult};
pub use probe::{linear_probe, probe_layer, ProbeConfig, ProbeResult};
pub use recon::{reconstruction_mse, squared_error_sum, EvalCorruption, ReconOutcome};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image_io::{tile, Raster};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Recon,
    Knn,
    Probe,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Recon, Metric::Knn, Metric::Probe];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recon => "recon",
            Metric::Knn => "knn",
            Metric::Probe => "probe",
        }
    }

    /// Comma-separated metric names.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Metric::ALL.iter().map(|m| m.as_str()).collect();
            Error::Usage(format!("unknown metric `{s}`; valid metrics: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub metric: String,
    pub split: String,
    pub layer: String,
    pub value: f64,
    pub checkpoint: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub entries: Vec<ReportEntry>,
}

pub const REPORT_CSV_HEADER: &str = "metric,split,layer,value,checkpoint,seed";

impl EvalReport {
    pub fn push(&mut self, metric: &str, split: &str, layer: &str, value: f64, checkpoint: &str, seed: u64) {
        self.entries.push(ReportEntry {
            metric: metric.into(),
            split: split.into(),
            layer: layer.into(),
            value,
            checkpoint: checkpoint.into(),
            seed,
        });
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.metric, e.split, e.layer, e.value, e.checkpoint, e.seed
            )?;
        }
        Ok(())
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!("{:<24} {:<6} {:<12} {:>12}  {}\n", "metric", "split", "layer", "value", "checkpoint");
        for e in &self.entries {
            s.push_str(&format!(
                "{:<24} {:<6} {:<12} {:>12.6}  {}\n",
                e.metric, e.split, e.layer, e.value, e.checkpoint
            ));
        }
        s
    }
}

fn framed(r: &Raster, rgb: [f32; 3]) -> Raster {
    let (h, w) = (r.height + 2, r.width + 2);
    let mut out = Raster::filled(3, h, w, 0.0);
    for (c, &edge) in rgb.iter().enumerate() {
        let src = if r.channels == 3 { c } else { 0 };
        for y in 0..h {
            for x in 0..w {
                let border = y == 0 || x == 0 || y == h - 1 || x == w - 1;
                out.data[(c * h + y) * w + x] = if border { edge } else { r.get(src, y - 1, x - 1) };
            }
        }
    }
    out
}

const QUERY_FRAME: [f32; 3] = [0.2, 0.4, 1.0];
const HIT_FRAME: [f32; 3] = [0.6, 0.6, 0.6];
const MISS_FRAME: [f32; 3] = [1.0, 0.0, 0.0];

/// One row per query: the query, then its neighbors; wrong-class neighbors get a red frame.
pub fn retrieval_grid(images: &Tensor, labels: &[u8], result: &KnnResult) -> Result<Raster> {
    let mut tiles = Vec::new();
    for (&q, nn) in result.queries.iter().zip(&result.neighbors) {
        tiles.push(framed(&Raster::from_sample(images, q)?, QUERY_FRAME));
        for &g in nn {
            let frame = if labels[g] == labels[q] { HIT_FRAME } else { MISS_FRAME };
            tiles.push(framed(&Raster::from_sample(images, g)?, frame));
        }
    }
    tile(&tiles, result.k + 1, 1, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_lists_parse_and_reject_unknown_names() {
        assert_eq!(Metric::parse_list("recon,knn,probe").unwrap(), Metric::ALL.to_vec());
        match Metric::parse_list("recon,psnr") {
            Err(Error::Usage(msg)) => assert!(msg.contains("recon, knn, probe"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_csv_layout() {
        let mut r = EvalReport::default();
        r.push("probe_top1", "test", "conv2", 0.5, "ab12", 3);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{REPORT_CSV_HEADER}\nprobe_top1,test,conv2,0.5,ab12,3\n"));
    }

    #[test]
    fn retrieval_grid_marks_misses() {
        let images = Tensor::from_fn(&[4, 1, 2, 2], |i| (i / 4) as f32 / 4.0);
        let result = KnnResult {
            k: 2,
            precision: 0.5,
            queries: vec![0],
            neighbors: vec![vec![1, 2]],
        };
        let g = retrieval_grid(&images, &[0, 0, 1, 1], &result).unwrap();
        assert_eq!((g.channels, g.height, g.width), (3, 4, 3 * 4 + 2));
        // Top-left corner of the third tile is red.
        let x = 2 * 5;
        assert_eq!([g.get(0, 0, x), g.get(1, 0, x), g.get(2, 0, x)], MISS_FRAME);
        assert_eq!(g.get(1, 0, 5), HIT_FRAME[1]);
    }
}
