//! Convolutional encoder/decoder and feature extraction.
//!
//! The default plan has four 3×3 encoder convolutions (channels 32, 32, 64, 64;
//! strides 1, 2, 1, 2) and three 3×3 up-convolutions mirroring the two
//! downsampling steps, so a 28×28 input has a 64×7×7 bottleneck and a 32×32
//! input a 64×8×8 one. Hidden layers use ReLU and the last decoder layer a
//! sigmoid.

mod embed;

pub use embed::{extract_embedding, pooled_grid, EmbeddingLayer, Embeddings, DEFAULT_FEATURE_BUDGET};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, conv_out_extent, conv_transpose_out_extent, ConvGeom};
use crate::rng::rng_for;
use crate::tape::{GradTape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    UpConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Extra rows/columns on the far edge of an up-conv output.
    pub output_padding: usize,
    pub activation: Activation,
}

impl LayerSpec {
    fn conv(name: &str, cin: usize, cout: usize, stride: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv,
            in_channels: cin,
            out_channels: cout,
            kernel: 3,
            stride,
            padding: 1,
            output_padding: 0,
            activation: Activation::Relu,
        }
    }

    fn upconv(name: &str, cin: usize, cout: usize, stride: usize, activation: Activation) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::UpConv,
            in_channels: cin,
            out_channels: cout,
            kernel: 3,
            stride,
            padding: 1,
            output_padding: stride - 1,
            activation,
        }
    }

    pub fn geom(&self) -> ConvGeom {
        ConvGeom {
            stride: self.stride,
            padding: self.padding,
        }
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        let k = self.kernel;
        match self.kind {
            LayerKind::Conv => [self.out_channels, self.in_channels, k, k],
            LayerKind::UpConv => [self.in_channels, self.out_channels, k, k],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn out_extent(&self, n: usize) -> Option<usize> {
        match self.kind {
            LayerKind::Conv => conv_out_extent(n, self.kernel, self.stride, self.padding),
            LayerKind::UpConv => {
                conv_transpose_out_extent(n, self.kernel, self.stride, self.padding, self.output_padding)
            }
        }
    }
}

/// Layer chain plus the split point between encoder and decoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_channels: usize,
    pub encoder_layers: usize,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn lapdae(in_channels: usize) -> Self {
        Architecture {
            in_channels,
            encoder_layers: 4,
            layers: vec![
                LayerSpec::conv("conv1", in_channels, 32, 1),
                LayerSpec::conv("conv2", 32, 32, 2),
                LayerSpec::conv("conv3", 32, 64, 1),
                LayerSpec::conv("conv4", 64, 64, 2),
                LayerSpec::upconv("upconv1", 64, 32, 2, Activation::Relu),
                LayerSpec::upconv("upconv2", 32, 16, 2, Activation::Relu),
                LayerSpec::upconv("upconv3", 16, in_channels, 1, Activation::Sigmoid),
            ],
        }
    }

    /// A narrow two-layer-per-side network for gradient checks.
    pub fn tiny(in_channels: usize) -> Self {
        Architecture {
            in_channels,
            encoder_layers: 2,
            layers: vec![
                LayerSpec::conv("conv1", in_channels, 3, 1),
                LayerSpec::conv("conv2", 3, 4, 2),
                LayerSpec::upconv("upconv1", 4, 3, 2, Activation::Relu),
                LayerSpec::upconv("upconv2", 3, in_channels, 1, Activation::Sigmoid),
            ],
        }
    }

    pub fn encoder(&self) -> &[LayerSpec] {
        &self.layers[..self.encoder_layers]
    }

    pub fn decoder(&self) -> &[LayerSpec] {
        &self.layers[self.encoder_layers..]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::Config("architecture needs at least one input channel".into()));
        }
        if self.encoder_layers == 0 || self.encoder_layers >= self.layers.len() {
            return Err(Error::Config(format!(
                "encoder split {} must leave at least one layer on each side of {}",
                self.encoder_layers,
                self.layers.len()
            )));
        }
        let mut channels = self.in_channels;
        for (i, l) in self.layers.iter().enumerate() {
            let problem = if l.in_channels != channels {
                Some(format!("expects {} input channels but receives {channels}", l.in_channels))
            } else if l.out_channels == 0 || l.kernel == 0 || l.stride == 0 {
                Some("channel count, kernel and stride must be positive".to_string())
            } else if l.kind == LayerKind::Conv && l.kernel % 2 == 0 {
                Some(format!("kernel {} must be odd", l.kernel))
            } else if l.kind == LayerKind::Conv && l.output_padding != 0 {
                Some("output padding only applies to up-conv layers".to_string())
            } else if l.output_padding >= l.stride {
                Some(format!("output padding {} must be below stride {}", l.output_padding, l.stride))
            } else if (i < self.encoder_layers) != (l.kind == LayerKind::Conv) {
                Some("encoder layers must be conv and decoder layers up-conv".to_string())
            } else {
                None
            };
            if let Some(p) = problem {
                return Err(Error::Config(format!("layer {i} (`{}`): {p}", l.name)));
            }
            channels = l.out_channels;
        }
        if channels != self.in_channels {
            return Err(Error::Config(format!(
                "decoder ends with {channels} channels, expected {}",
                self.in_channels
            )));
        }
        Ok(())
    }

    /// Spatial extents after each layer for an `h × w` input.
    pub fn extents(&self, h: usize, w: usize) -> Result<Vec<(usize, usize)>> {
        let mut cur = (h, w);
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            cur = match (l.out_extent(cur.0), l.out_extent(cur.1)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::dim(
                        "architecture",
                        format!("layer `{}` cannot process a {}x{} map", l.name, cur.0, cur.1),
                    ))
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    /// Check that an `h × w` input reconstructs at its own size.
    pub fn check_input(&self, c: usize, h: usize, w: usize) -> Result<()> {
        if c != self.in_channels {
            return Err(Error::dim(
                "model",
                format!("input has {c} channels, model expects {}", self.in_channels),
            ));
        }
        let ext = self.extents(h, w)?;
        if ext.last() != Some(&(h, w)) {
            return Err(Error::dim(
                "model",
                format!(
                    "a {h}x{w} input is incompatible with the stride chain (decoder would emit {:?})",
                    ext.last()
                ),
            ));
        }
        Ok(())
    }
}

/// Named learnable tensors in layer order: `<layer>.weight`, `<layer>.bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    tensors: Vec<(String, Tensor)>,
}

impl ModelParams {
    /// Kaiming-normal kernels with std `sqrt(2 / fan_in)`, zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut tensors = Vec::with_capacity(arch.layers.len() * 2);
        for (i, l) in arch.layers.iter().enumerate() {
            let mut rng = rng_for(seed, &[i as u64]);
            let std = (2.0 / l.fan_in() as f64).sqrt() as f32;
            let w = Tensor::from_fn(&l.kernel_shape(), |_| std * rng.sample::<f32, _>(StandardNormal));
            tensors.push((format!("{}.weight", l.name), w));
            tensors.push((format!("{}.bias", l.name), Tensor::zeros(&[l.out_channels])));
        }
        Ok(ModelParams {
            arch: arch.clone(),
            tensors,
        })
    }

    pub fn zeros(arch: &Architecture) -> Result<Self> {
        let mut p = Self::init(arch, 0)?;
        for (_, t) in &mut p.tensors {
            t.data_mut().fill(0.0);
        }
        Ok(p)
    }

    /// Rebuild from stored tensors, checking names and shapes against `arch`.
    pub fn from_parts(arch: Architecture, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        arch.validate()?;
        let expected = Self::zeros(&arch)?;
        if expected.tensors.len() != tensors.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                expected.tensors.len(),
                tensors.len()
            )));
        }
        for ((en, et), (n, t)) in expected.tensors.iter().zip(&tensors) {
            if en != n || et.shape() != t.shape() {
                return Err(Error::Config(format!(
                    "parameter `{n}` {:?} does not match expected `{en}` {:?}",
                    t.shape(),
                    et.shape()
                )));
            }
        }
        Ok(ModelParams { arch, tensors })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    /// Short hash over names, shapes and little-endian values.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.num_scalars() * 4);
        for (name, t) in &self.tensors {
            bytes.extend_from_slice(name.as_bytes());
            for &d in t.shape() {
                bytes.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        crate::config::fingerprint(&bytes)
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.tensors[id].0
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id].1
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id].1
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|(_, t)| t.all_finite())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    fn layer_params(&self, layer: usize) -> (&Tensor, &Tensor) {
        (&self.tensors[2 * layer].1, &self.tensors[2 * layer + 1].1)
    }
}

fn activate(t: Tensor, a: Activation) -> Tensor {
    match a {
        Activation::Relu => kernels::relu(&t),
        Activation::Sigmoid => kernels::sigmoid(&t),
        Activation::Identity => t,
    }
}

fn apply_layer(spec: &LayerSpec, w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor> {
    let pre = match spec.kind {
        LayerKind::Conv => kernels::conv2d(x, w, b, spec.geom())?,
        LayerKind::UpConv => kernels::conv_transpose2d(x, w, b, spec.geom(), spec.output_padding)?,
    };
    Ok(activate(pre, spec.activation))
}

/// Encoder output plus the post-activation map of every encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub bottleneck: Tensor,
    pub features: Vec<Tensor>,
}

/// Run the encoder. The bottleneck keeps its spatial layout.
pub fn encode(params: &ModelParams, x: &Tensor) -> Result<EncodedBatch> {
    let (_, c, h, w) = x.dims4()?;
    params.arch.check_input(c, h, w)?;
    let mut features = Vec::with_capacity(params.arch.encoder_layers);
    let mut cur = x.clone();
    for (i, spec) in params.arch.encoder().iter().enumerate() {
        let (wt, b) = params.layer_params(i);
        cur = apply_layer(spec, wt, b, &cur)?;
        features.push(cur.clone());
    }
    Ok(EncodedBatch {
        bottleneck: cur,
        features,
    })
}

/// Run the decoder on a bottleneck tensor.
pub fn decode(params: &ModelParams, bottleneck: &Tensor) -> Result<Tensor> {
    let arch = &params.arch;
    let (_, c, _, _) = bottleneck.dims4()?;
    let expected = arch.encoder().last().map(|l| l.out_channels).unwrap_or(0);
    if c != expected {
        return Err(Error::dim(
            "decode",
            format!("bottleneck has {c} channels, decoder expects {expected}"),
        ));
    }
    let mut cur = bottleneck.clone();
    for (j, spec) in arch.decoder().iter().enumerate() {
        let (wt, b) = params.layer_params(arch.encoder_layers + j);
        cur = apply_layer(spec, wt, b, &cur)?;
    }
    Ok(cur)
}

pub fn reconstruct(params: &ModelParams, x: &Tensor) -> Result<Tensor> {
    decode(params, &encode(params, x)?.bottleneck)
}

/// Tape handles produced by [`forward_on_tape`].
pub struct TapeForward {
    pub bottleneck: Var,
    pub output: Var,
}

/// Record the full encoder/decoder pass on `tape`, parameter ids following
/// [`ModelParams::tensors`] order.
pub fn forward_on_tape<'p>(params: &'p ModelParams, tape: &mut GradTape<'p>, input: Var) -> Result<TapeForward> {
    let (_, c, h, w) = tape.value(input).dims4()?;
    params.arch.check_input(c, h, w)?;
    let mut cur = input;
    let mut bottleneck = input;
    for (i, spec) in params.arch.layers.iter().enumerate() {
        let wv = tape.param(2 * i, &params.tensors[2 * i].1);
        let bv = tape.param(2 * i + 1, &params.tensors[2 * i + 1].1);
        let pre = match spec.kind {
            LayerKind::Conv => tape.conv2d(cur, wv, bv, spec.geom())?,
            LayerKind::UpConv => tape.conv_transpose2d(cur, wv, bv, spec.geom(), spec.output_padding)?,
        };
        cur = match spec.activation {
            Activation::Relu => tape.relu(pre),
            Activation::Sigmoid => tape.sigmoid(pre),
            Activation::Identity => pre,
        };
        if i + 1 == params.arch.encoder_layers {
            bottleneck = cur;
        }
    }
    Ok(TapeForward {
        bottleneck,
        output: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_shapes() {
        let arch = Architecture::lapdae(1);
        arch.validate().unwrap();
        let ext = arch.extents(28, 28).unwrap();
        assert_eq!(ext, vec![(28, 28), (14, 14), (14, 14), (7, 7), (14, 14), (28, 28), (28, 28)]);
        let cifar = Architecture::lapdae(3);
        assert_eq!(cifar.extents(32, 32).unwrap()[3], (8, 8));
        assert_eq!(cifar.extents(32, 32).unwrap()[6], (32, 32));
        assert!(arch.check_input(1, 27, 27).is_err());
        assert!(arch.check_input(3, 28, 28).is_err());
    }

    #[test]
    fn encode_decode_shapes() {
        let params = ModelParams::init(&Architecture::lapdae(1), 0).unwrap();
        let x = Tensor::full(&[1, 1, 28, 28], 0.3);
        let enc = encode(&params, &x).unwrap();
        assert_eq!(enc.bottleneck.shape(), &[1, 64, 7, 7]);
        assert_eq!(enc.features.len(), 4);
        let z = decode(&params, &enc.bottleneck).unwrap();
        assert_eq!(z.shape(), &[1, 1, 28, 28]);
        assert!(z.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(decode(&params, &Tensor::zeros(&[1, 32, 7, 7])).is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let arch = Architecture::lapdae(1);
        let a = ModelParams::init(&arch, 42).unwrap();
        let b = ModelParams::init(&arch, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ModelParams::init(&arch, 43).unwrap());
        for (name, t) in a.tensors() {
            if name.ends_with(".bias") {
                assert!(t.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn kaiming_std_matches_formula() {
        let arch = Architecture::lapdae(1);
        let p = ModelParams::init(&arch, 7).unwrap();
        // conv3 has 64·32·9 = 18432 weights with fan-in 288.
        let w = p.by_name("conv3.weight").unwrap();
        assert!(w.len() >= 10_000);
        let mean = w.mean();
        let var = w.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let target = (2.0f64 / 288.0).sqrt();
        assert!((var.sqrt() - target).abs() < 0.1 * target);
    }

    #[test]
    fn zero_model_gives_zero_bottleneck() {
        let p = ModelParams::zeros(&Architecture::lapdae(1)).unwrap();
        let enc = encode(&p, &Tensor::zeros(&[2, 1, 28, 28])).unwrap();
        assert!(enc.bottleneck.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_encode_equals_stacked_single_encodes() {
        let p = ModelParams::init(&Architecture::lapdae(1), 3).unwrap();
        let x = Tensor::from_fn(&[2, 1, 28, 28], |i| ((i * 37) % 101) as f32 / 101.0);
        let joint = encode(&p, &x).unwrap().bottleneck;
        let parts: Vec<Tensor> = (0..2).map(|i| encode(&p, &x.sample(i).unwrap()).unwrap().bottleneck).collect();
        let stacked = Tensor::stack(&parts).unwrap();
        assert!(joint.max_abs_diff(&stacked).unwrap() < 1e-6);
    }

    #[test]
    fn invalid_chain_names_first_bad_layer() {
        let mut arch = Architecture::lapdae(1);
        arch.layers[2].in_channels = 16;
        let msg = arch.validate().unwrap_err().to_string();
        assert!(msg.contains("layer 2") && msg.contains("conv3"), "{msg}");
        let mut arch = Architecture::lapdae(1);
        arch.layers[6].out_channels = 3;
        assert!(ModelParams::init(&arch, 0).is_err());
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let p = ModelParams::init(&Architecture::lapdae(3), 1).unwrap();
        let x = Tensor::from_fn(&[2, 3, 32, 32], |i| (i % 17) as f32 / 17.0);
        let plain = reconstruct(&p, &x).unwrap();
        let mut tape = GradTape::new();
        let xv = tape.input(x.clone());
        let fwd = forward_on_tape(&p, &mut tape, xv).unwrap();
        assert_eq!(tape.value(fwd.output), &plain);
        assert_eq!(tape.value(fwd.bottleneck).shape(), &[2, 64, 8, 8]);
    }
}
