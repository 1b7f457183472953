//! Naive f64 reference implementations, fixture writers and the check
//! drivers shared by the integration tests. The oracles never touch the
//! crate's kernels.
#![allow(dead_code)]

use std::path::Path;

use lapdae::model::{Activation, LayerKind, ModelParams};
use lapdae::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense f64 array with a BCHW shape.
#[derive(Debug, Clone)]
pub struct Arr {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Arr {
    pub fn from_tensor(t: &Tensor) -> Arr {
        let s = t.shape();
        Arr {
            shape: [s[0], s[1], s[2], s[3]],
            data: t.data().iter().map(|&v| v as f64).collect(),
        }
    }

    fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        let [_, cc, h, w] = self.shape;
        self.data[((b * cc + c) * h + y) * w + x]
    }
}

/// Direct convolution. `w` is `O×I×K×K`.
pub fn conv2d(x: &Arr, w: &[f64], o: usize, k: usize, bias: &[f64], stride: usize, pad: usize) -> Arr {
    let [bn, ci, h, wd] = x.shape;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; bn * o * oh * ow];
    for b in 0..bn {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[oc];
                    for ic in 0..ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += w[((oc * ci + ic) * k + ky) * k + kx] * x.at(b, ic, iy as usize, ix as usize);
                            }
                        }
                    }
                    out[((b * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Arr {
        shape: [bn, o, oh, ow],
        data: out,
    }
}

/// Direct scatter form of the transposed convolution. `w` is `I×O×K×K`.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d(
    x: &Arr,
    w: &[f64],
    o: usize,
    k: usize,
    bias: &[f64],
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Arr {
    let [bn, ci, h, wd] = x.shape;
    let oh = (h - 1) * stride + k + out_pad - 2 * pad;
    let ow = (wd - 1) * stride + k + out_pad - 2 * pad;
    let mut out = vec![0.0; bn * o * oh * ow];
    for b in 0..bn {
        for oc in 0..o {
            for v in &mut out[(b * o + oc) * oh * ow..(b * o + oc + 1) * oh * ow] {
                *v = bias[oc];
            }
        }
        for ic in 0..ci {
            for iy in 0..h {
                for ix in 0..wd {
                    let xv = x.at(b, ic, iy, ix);
                    for oc in 0..o {
                        for ky in 0..k {
                            for kx in 0..k {
                                let y = (iy * stride + ky) as isize - pad as isize;
                                let xx = (ix * stride + kx) as isize - pad as isize;
                                if y < 0 || xx < 0 || y >= oh as isize || xx >= ow as isize {
                                    continue;
                                }
                                out[((b * o + oc) * oh + y as usize) * ow + xx as usize] +=
                                    xv * w[((ic * o + oc) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    Arr {
        shape: [bn, o, oh, ow],
        data: out,
    }
}

/// Full encoder/decoder pass in f64, with `theta` holding every parameter
/// tensor in the model's order.
pub fn forward(params: &ModelParams, theta: &[Vec<f64>], x: &Arr) -> Arr {
    forward_with_pattern(params, theta, x).0
}

/// The forward pass plus the on/off state of every ReLU unit.
pub fn forward_with_pattern(params: &ModelParams, theta: &[Vec<f64>], x: &Arr) -> (Arr, Vec<bool>) {
    let mut pattern = Vec::new();
    let mut cur = x.clone();
    for (i, spec) in params.arch().layers.iter().enumerate() {
        let (w, b) = (&theta[2 * i], &theta[2 * i + 1]);
        let o = spec.out_channels;
        let mut next = match spec.kind {
            LayerKind::Conv => conv2d(&cur, w, o, spec.kernel, b, spec.stride, spec.padding),
            LayerKind::UpConv => {
                conv_transpose2d(&cur, w, o, spec.kernel, b, spec.stride, spec.padding, spec.output_padding)
            }
        };
        match spec.activation {
            Activation::Relu => next.data.iter_mut().for_each(|v| {
                pattern.push(*v > 0.0);
                *v = v.max(0.0)
            }),
            Activation::Sigmoid => next.data.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp())),
            Activation::Identity => {}
        }
        cur = next;
    }
    (cur, pattern)
}

/// `Σ_c mean‖x − z_c‖²` where `inputs` stacks `copies` corrupted versions
/// of `clean` member-major.
pub fn objective(params: &ModelParams, theta: &[Vec<f64>], clean: &Arr, inputs: &Arr, copies: usize) -> f64 {
    objective_with_pattern(params, theta, clean, inputs, copies).0
}

pub fn objective_with_pattern(
    params: &ModelParams,
    theta: &[Vec<f64>],
    clean: &Arr,
    inputs: &Arr,
    copies: usize,
) -> (f64, Vec<bool>) {
    let (z, pattern) = forward_with_pattern(params, theta, inputs);
    let per = clean.data.len();
    let mut total = 0.0;
    for c in 0..copies {
        let zc = &z.data[c * per..(c + 1) * per];
        total += zc.iter().zip(&clean.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / per as f64;
    }
    (total, pattern)
}

pub fn theta_of(params: &ModelParams) -> Vec<Vec<f64>> {
    params.tensors().iter().map(|(_, t)| t.data().iter().map(|&v| v as f64).collect()).collect()
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// IDX image file with big-endian header.
pub fn idx_images(n: usize, h: usize, w: usize, fill: impl Fn(usize) -> u8) -> Vec<u8> {
    let mut out = vec![0, 0, 8, 3];
    for v in [n, h, w] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend((0..n * h * w).map(fill));
    out
}

pub fn idx_labels(n: usize) -> Vec<u8> {
    let mut out = vec![0, 0, 8, 1];
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend((0..n).map(|i| (i % 10) as u8));
    out
}

/// A small MNIST tree whose digits are blurry blobs, enough to train on.
pub fn write_mnist_fixture(root: &Path, train: usize, test: usize) {
    let dir = root.join("mnist");
    std::fs::create_dir_all(&dir).unwrap();
    let blob = |i: usize| {
        let (n, p) = (i / 784, i % 784);
        let (y, x) = ((p / 28) as f32, (p % 28) as f32);
        let cy = 8.0 + (n % 5) as f32 * 3.0;
        let cx = 8.0 + (n % 7) as f32 * 2.0;
        let d2 = (y - cy).powi(2) + (x - cx).powi(2);
        (255.0 * (-d2 / 18.0).exp()) as u8
    };
    std::fs::write(dir.join("train-images-idx3-ubyte"), idx_images(train, 28, 28, blob)).unwrap();
    std::fs::write(dir.join("train-labels-idx1-ubyte"), idx_labels(train)).unwrap();
    std::fs::write(dir.join("t10k-images-idx3-ubyte"), idx_images(test, 28, 28, blob)).unwrap();
    std::fs::write(dir.join("t10k-labels-idx1-ubyte"), idx_labels(test)).unwrap();
}

/// CIFAR-10 binary batch of `n` records.
pub fn cifar_batch(n: usize, offset: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n * 3073);
    for i in 0..n {
        out.push(((i + offset) % 10) as u8);
        out.extend((0..3072).map(|p| ((p + i + offset) % 251) as u8));
    }
    out
}

pub fn write_cifar_fixture(root: &Path, per_batch: usize, test: usize) {
    let dir = root.join("cifar-10-batches-bin");
    std::fs::create_dir_all(&dir).unwrap();
    for b in 1..=5 {
        std::fs::write(dir.join(format!("data_batch_{b}.bin")), cifar_batch(per_batch, b * per_batch)).unwrap();
    }
    std::fs::write(dir.join("test_batch.bin"), cifar_batch(test, 0)).unwrap();
}

/// Dataset root from `LAPDAE_DATA_DIR`, if it holds the named dataset.
pub fn data_root(sub: &str) -> Option<std::path::PathBuf> {
    let root = std::path::PathBuf::from(std::env::var_os("LAPDAE_DATA_DIR")?);
    root.join(sub).is_dir().then_some(root)
}

/// Relative gap between `<conv(x), y>` and `<x, convᵀ(y)>` for one case.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_gap(seed: u64, b: usize, ci: usize, co: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> f64 {
    use lapdae::kernels::{conv2d, conv_transpose2d, ConvGeom};
    let mut r = rng(seed);
    let x = random_tensor(&[b, ci, h, w], &mut r, -1.0, 1.0);
    let kern = random_tensor(&[co, ci, k, k], &mut r, -1.0, 1.0);
    let geom = ConvGeom { stride, padding: pad };
    let y = conv2d(&x, &kern, &Tensor::zeros(&[co]), geom).unwrap();
    let g = random_tensor(y.shape(), &mut r, -1.0, 1.0);
    let out_pad_h = (h + 2 * pad - k) % stride;
    let out_pad_w = (w + 2 * pad - k) % stride;
    assert_eq!(out_pad_h, out_pad_w, "cases use square remainders");
    let back = conv_transpose2d(&g, &kern, &Tensor::zeros(&[ci]), geom, out_pad_h).unwrap();
    assert_eq!(back.shape(), x.shape());
    let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| *a as f64 * *b as f64).sum();
    let rhs: f64 = x.data().iter().zip(back.data()).map(|(a, b)| *a as f64 * *b as f64).sum();
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12)
}

pub struct GradCheck {
    /// Coordinates whose ±ε stencil keeps every ReLU on the same side.
    pub checked: usize,
    pub within: usize,
    pub worst: f64,
    /// Coordinates skipped because the stencil straddles a ReLU kink.
    pub straddling: usize,
    /// Within tolerance counting straddling coordinates too.
    pub within_raw: usize,
}

/// Central differences of the f64 oracle objective against the crate's
/// reverse-mode gradients on the tiny architecture.
///
/// The objective is only piecewise smooth, so a coordinate whose ±ε
/// perturbation flips a ReLU has no meaningful central difference and is
/// left out of the sample.
pub fn gradient_check(seed: u64, eps: f64, rel_tol: f64) -> GradCheck {
    gradient_check_sized(seed, eps, rel_tol, 2, 2, 8)
}

pub fn gradient_check_sized(seed: u64, eps: f64, rel_tol: f64, b: usize, copies: usize, hw: usize) -> GradCheck {
    use lapdae::model::Architecture;
    use lapdae::optim::step_gradients;
    let params = ModelParams::init(&Architecture::tiny(1), seed).unwrap();
    let mut r = rng(seed ^ 0x9e37);
    let clean = random_tensor(&[b, 1, hw, hw], &mut r, 0.0, 1.0);
    let inputs = random_tensor(&[b * copies, 1, hw, hw], &mut r, 0.0, 1.0);
    let (_, grads) = step_gradients(&params, &clean, &inputs, copies).unwrap();
    let (clean_a, inputs_a) = (Arr::from_tensor(&clean), Arr::from_tensor(&inputs));
    let mut theta = theta_of(&params);
    let (_, base) = objective_with_pattern(&params, &theta, &clean_a, &inputs_a, copies);
    let mut out = GradCheck {
        checked: 0,
        within: 0,
        worst: 0.0,
        straddling: 0,
        within_raw: 0,
    };
    for p in 0..theta.len() {
        let analytic = grads.get(p).expect("every parameter has a gradient");
        for j in 0..theta[p].len() {
            let orig = theta[p][j];
            theta[p][j] = orig + eps;
            let (up, up_pattern) = objective_with_pattern(&params, &theta, &clean_a, &inputs_a, copies);
            theta[p][j] = orig - eps;
            let (down, down_pattern) = objective_with_pattern(&params, &theta, &clean_a, &inputs_a, copies);
            theta[p][j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[j] as f64;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel <= rel_tol {
                out.within_raw += 1;
            }
            if up_pattern != base || down_pattern != base {
                out.straddling += 1;
                continue;
            }
            out.checked += 1;
            if rel <= rel_tol {
                out.within += 1;
            }
            out.worst = out.worst.max(rel);
        }
    }
    out
}
