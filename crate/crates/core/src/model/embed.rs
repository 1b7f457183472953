use std::fmt;
use std::str::FromStr;

use super::{encode, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default per-sample element budget for pooled features.
pub const DEFAULT_FEATURE_BUDGET: usize = 9216;

const CHUNK: usize = 256;

/// Where features are taken from. `Input` is the raw-pixel identity backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmbeddingLayer {
    Input,
    Conv(usize),
    Bottleneck,
}

impl EmbeddingLayer {
    pub const ALL_CONV: [EmbeddingLayer; 5] = [
        EmbeddingLayer::Conv(1),
        EmbeddingLayer::Conv(2),
        EmbeddingLayer::Conv(3),
        EmbeddingLayer::Conv(4),
        EmbeddingLayer::Bottleneck,
    ];

    /// Inclusive range such as `conv1..bottleneck`.
    pub fn parse_range(s: &str) -> Result<Vec<EmbeddingLayer>> {
        let mut out = Vec::new();
        for part in s.split(',') {
            if let Some((a, b)) = part.split_once("..") {
                let (a, b): (EmbeddingLayer, EmbeddingLayer) = (a.parse()?, b.parse()?);
                // conv4 and bottleneck are distinct tags even when they share a map.
                let order = [
                    EmbeddingLayer::Input,
                    EmbeddingLayer::Conv(1),
                    EmbeddingLayer::Conv(2),
                    EmbeddingLayer::Conv(3),
                    EmbeddingLayer::Conv(4),
                    EmbeddingLayer::Bottleneck,
                ];
                let pos = |l: EmbeddingLayer| order.iter().position(|&o| o == l);
                match (pos(a), pos(b)) {
                    (Some(i), Some(j)) if i <= j => out.extend_from_slice(&order[i..=j]),
                    _ => return Err(Error::Usage(format!("invalid layer range `{part}`"))),
                }
            } else {
                out.push(part.parse()?);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for EmbeddingLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingLayer::Input => write!(f, "input"),
            EmbeddingLayer::Conv(i) => write!(f, "conv{i}"),
            EmbeddingLayer::Bottleneck => write!(f, "bottleneck"),
        }
    }
}

impl FromStr for EmbeddingLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "input" | "pixels" => Ok(EmbeddingLayer::Input),
            "bottleneck" => Ok(EmbeddingLayer::Bottleneck),
            _ => s
                .strip_prefix("conv")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(EmbeddingLayer::Conv)
                .ok_or_else(|| {
                    Error::Usage(format!(
                        "unknown layer `{s}`; valid layers are input, conv1..conv4, bottleneck"
                    ))
                }),
        }
    }
}

/// Per-sample flattened features, `n × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub layer: EmbeddingLayer,
    pub n: usize,
    pub dim: usize,
    /// `(channels, grid_h, grid_w)` of the pooled map behind each row.
    pub grid: (usize, usize, usize),
    pub data: Vec<f32>,
}

impl Embeddings {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Largest `gh × gw` grid (aspect preserved) with `channels·gh·gw ≤ budget`.
pub fn pooled_grid(channels: usize, h: usize, w: usize, budget: usize) -> (usize, usize) {
    if channels * h * w <= budget {
        return (h, w);
    }
    for gh in (1..=h).rev() {
        let gw = ((gh * w) / h).clamp(1, w);
        if channels * gh * gw <= budget {
            return (gh, gw);
        }
    }
    (1, 1)
}

/// Adaptive average pooling of one `h × w` plane onto a `gh × gw` grid.
fn adaptive_pool(plane: &[f32], h: usize, w: usize, gh: usize, gw: usize, out: &mut Vec<f32>) {
    if (gh, gw) == (h, w) {
        out.extend_from_slice(plane);
        return;
    }
    for i in 0..gh {
        let (y0, y1) = ((i * h) / gh, ((i + 1) * h).div_ceil(gh));
        for j in 0..gw {
            let (x0, x1) = ((j * w) / gw, ((j + 1) * w).div_ceil(gw));
            let mut acc = 0.0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += plane[y * w + x] as f64;
                }
            }
            out.push((acc / ((y1 - y0) * (x1 - x0)) as f64) as f32);
        }
    }
}

fn layer_map(params: &ModelParams, x: &Tensor, layer: EmbeddingLayer) -> Result<Tensor> {
    let enc_layers = params.arch().encoder_layers;
    match layer {
        EmbeddingLayer::Input => Ok(x.clone()),
        EmbeddingLayer::Conv(i) if i >= 1 && i <= enc_layers => {
            let mut enc = encode(params, x)?;
            Ok(enc.features.swap_remove(i - 1))
        }
        EmbeddingLayer::Bottleneck => Ok(encode(params, x)?.bottleneck),
        EmbeddingLayer::Conv(i) => Err(Error::Usage(format!(
            "layer conv{i} does not exist; the encoder has {enc_layers} conv layers"
        ))),
    }
}

/// Flattened per-sample features from `layer`, average-pooled to at most
/// `budget` elements when a budget is given.
pub fn extract_embedding(
    params: &ModelParams,
    x: &Tensor,
    layer: EmbeddingLayer,
    budget: Option<usize>,
) -> Result<Embeddings> {
    let (n, _, _, _) = x.dims4()?;
    let mut data = Vec::new();
    let mut grid = (0, 0, 0);
    let mut start = 0;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let map = layer_map(params, &x.select(&idx)?, layer)?;
        let (b, c, h, w) = map.dims4()?;
        let (gh, gw) = budget.map_or((h, w), |bud| pooled_grid(c, h, w, bud));
        grid = (c, gh, gw);
        for plane in map.data().chunks(h * w) {
            adaptive_pool(plane, h, w, gh, gw, &mut data);
        }
        debug_assert_eq!(data.len(), (start + b) * c * gh * gw);
        start += b;
    }
    let dim = grid.0 * grid.1 * grid.2;
    Ok(Embeddings {
        layer,
        n,
        dim,
        grid,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;

    #[test]
    fn bottleneck_length_and_determinism() {
        let p = ModelParams::init(&Architecture::lapdae(1), 0).unwrap();
        let one = Tensor::from_fn(&[1, 1, 28, 28], |i| (i % 9) as f32 / 9.0);
        let x = Tensor::stack(&[one.clone(), one]).unwrap();
        let e = extract_embedding(&p, &x, EmbeddingLayer::Bottleneck, None).unwrap();
        assert_eq!(e.dim, 64 * 7 * 7);
        assert_eq!(e.row(0), e.row(1));
    }

    #[test]
    fn pooling_respects_budget() {
        assert_eq!(pooled_grid(64, 7, 7, 9216), (7, 7));
        assert_eq!(pooled_grid(32, 28, 28, 9216), (16, 16));
        assert_eq!(pooled_grid(32, 32, 32, 9216), (16, 16));
        let p = ModelParams::init(&Architecture::lapdae(1), 0).unwrap();
        let x = Tensor::full(&[3, 1, 28, 28], 0.5);
        for layer in EmbeddingLayer::ALL_CONV {
            let e = extract_embedding(&p, &x, layer, Some(DEFAULT_FEATURE_BUDGET)).unwrap();
            assert!(e.dim <= DEFAULT_FEATURE_BUDGET, "{layer}: {}", e.dim);
        }
        let raw = extract_embedding(&p, &x, EmbeddingLayer::Input, Some(DEFAULT_FEATURE_BUDGET)).unwrap();
        assert_eq!(raw.dim, 784);
    }

    #[test]
    fn adaptive_pool_of_constant_is_constant() {
        let plane = vec![2.5f32; 28 * 28];
        let mut out = Vec::new();
        adaptive_pool(&plane, 28, 28, 16, 16, &mut out);
        assert_eq!(out.len(), 256);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-6));
    }

    #[test]
    fn layer_tags_parse() {
        assert_eq!("conv3".parse::<EmbeddingLayer>().unwrap(), EmbeddingLayer::Conv(3));
        assert!("fc7".parse::<EmbeddingLayer>().is_err());
        let range = EmbeddingLayer::parse_range("conv1..bottleneck").unwrap();
        assert_eq!(range.len(), 5);
        assert_eq!(EmbeddingLayer::parse_range("input,conv2").unwrap().len(), 2);
        assert!(EmbeddingLayer::parse_range("bottleneck..conv1").is_err());
        let p = ModelParams::init(&Architecture::lapdae(1), 0).unwrap();
        assert!(extract_embedding(&p, &Tensor::zeros(&[1, 1, 28, 28]), EmbeddingLayer::Conv(5), None).is_err());
    }
}
