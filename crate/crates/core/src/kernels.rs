//! Forward and backward numerical kernels.
//!
//! Convolutions are cross-correlations lowered to GEMM through an im2col
//! buffer, one sample at a time. Transposed convolution is implemented as the
//! exact adjoint of [`conv2d`] with the same kernel tensor, stride and padding.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spatial geometry shared by a convolution and its adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub padding: usize,
}

pub fn conv_out_extent(n: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = n + 2 * padding;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

pub fn conv_transpose_out_extent(
    n: usize,
    k: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Option<usize> {
    ((n - 1) * stride + k + output_padding).checked_sub(2 * padding).filter(|&v| v > 0)
}

/// `c[m×n] = alpha·op(a)·op(b) + beta·c` on row-major slices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    beta: f32,
    c: &mut [f32],
) {
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices are at least as long as the strided extents above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct Im2col {
    channels: usize,
    height: usize,
    width: usize,
    k: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Im2col {
    fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn source(&self, o: usize, kidx: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + kidx) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    fn gather(&self, image: &[f32], col: &mut [f32]) {
        let (k, ow, cols) = (self.k, self.out_w, self.cols());
        for c in 0..self.channels {
            let plane = &image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut col[((c * k + ki) * k + kj) * cols..][..cols];
                    for oy in 0..self.out_h {
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        match self.source(oy, ki, self.height) {
                            None => dst.fill(0.0),
                            Some(iy) => {
                                let src = &plane[iy * self.width..(iy + 1) * self.width];
                                for (ox, d) in dst.iter_mut().enumerate() {
                                    *d = self.source(ox, kj, self.width).map_or(0.0, |ix| src[ix]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Im2col::gather`]: scatter-add columns back into the image.
    fn scatter_add(&self, col: &[f32], image: &mut [f32]) {
        let (k, ow, cols) = (self.k, self.out_w, self.cols());
        for c in 0..self.channels {
            let plane = &mut image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &col[((c * k + ki) * k + kj) * cols..][..cols];
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ki, self.height) else {
                            continue;
                        };
                        let dst = &mut plane[iy * self.width..(iy + 1) * self.width];
                        for (ox, &v) in row[oy * ow..(oy + 1) * ow].iter().enumerate() {
                            if let Some(ix) = self.source(ox, kj, self.width) {
                                dst[ix] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_kernel(op: &'static str, kernels: &Tensor) -> Result<(usize, usize, usize)> {
    match kernels.shape()[..] {
        [a, b, kh, kw] if kh == kw => Ok((a, b, kh)),
        _ => Err(Error::dim(
            op,
            format!("kernel must be 4-D with square spatial extent, got {:?}", kernels.shape()),
        )),
    }
}

fn check_bias(op: &'static str, bias: &Tensor, channels: usize) -> Result<()> {
    if bias.shape() != [channels] {
        return Err(Error::dim(
            op,
            format!("bias shape {:?} does not match {channels} output channels", bias.shape()),
        ));
    }
    Ok(())
}

fn check_geom(op: &'static str, geom: ConvGeom) -> Result<()> {
    if geom.stride == 0 {
        return Err(Error::InvalidArgument(format!("{op}: stride must be at least 1")));
    }
    Ok(())
}

fn conv_plan(op: &'static str, input: &Tensor, kernels: &Tensor, geom: ConvGeom) -> Result<(usize, Im2col)> {
    check_geom(op, geom)?;
    let (_, c, h, w) = input.dims4()?;
    let (o, i, k) = check_kernel(op, kernels)?;
    if i != c {
        return Err(Error::dim(
            op,
            format!("input channel axis has {c} channels but kernel in-channel axis expects {i}"),
        ));
    }
    if k % 2 == 0 {
        return Err(Error::dim(op, format!("kernel spatial size {k} must be odd")));
    }
    let out_h = conv_out_extent(h, k, geom.stride, geom.padding)
        .ok_or_else(|| Error::dim(op, format!("height {h} too small for kernel {k}")))?;
    let out_w = conv_out_extent(w, k, geom.stride, geom.padding)
        .ok_or_else(|| Error::dim(op, format!("width {w} too small for kernel {k}")))?;
    Ok((
        o,
        Im2col {
            channels: c,
            height: h,
            width: w,
            k,
            stride: geom.stride,
            padding: geom.padding,
            out_h,
            out_w,
        },
    ))
}

/// 2-D cross-correlation: input `B×I×H×W`, kernels `O×I×K×K`, bias `O`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor, geom: ConvGeom) -> Result<Tensor> {
    let (o, plan) = conv_plan("conv2d", input, kernels, geom)?;
    check_bias("conv2d", bias, o)?;
    let batch = input.shape()[0];
    let (rows, cols) = (plan.rows(), plan.cols());
    let in_n = plan.channels * plan.height * plan.width;
    let mut col = vec![0.0f32; rows * cols];
    let mut out = vec![0.0f32; batch * o * cols];
    for b in 0..batch {
        plan.gather(&input.data()[b * in_n..(b + 1) * in_n], &mut col);
        let dst = &mut out[b * o * cols..(b + 1) * o * cols];
        for (oc, chunk) in dst.chunks_mut(cols).enumerate() {
            chunk.fill(bias.data()[oc]);
        }
        gemm(o, rows, cols, kernels.data(), false, &col, false, 1.0, dst);
    }
    Tensor::new(vec![batch, o, plan.out_h, plan.out_w], out)
}

/// Gradients of [`conv2d`] with respect to its input, kernels and bias.
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    geom: ConvGeom,
) -> Result<ConvGrads> {
    let (o, plan) = conv_plan("conv2d_backward", input, kernels, geom)?;
    let batch = input.shape()[0];
    let (rows, cols) = (plan.rows(), plan.cols());
    if grad_out.shape() != [batch, o, plan.out_h, plan.out_w] {
        return Err(Error::dim(
            "conv2d_backward",
            format!(
                "output gradient {:?} does not match forward output {:?}",
                grad_out.shape(),
                [batch, o, plan.out_h, plan.out_w]
            ),
        ));
    }
    let in_n = plan.channels * plan.height * plan.width;
    let mut col = vec![0.0f32; rows * cols];
    let mut dcol = vec![0.0f32; rows * cols];
    let mut d_input = vec![0.0f32; batch * in_n];
    let mut d_kernels = vec![0.0f32; o * rows];
    let mut d_bias = vec![0.0f64; o];
    for b in 0..batch {
        let g = &grad_out.data()[b * o * cols..(b + 1) * o * cols];
        plan.gather(&input.data()[b * in_n..(b + 1) * in_n], &mut col);
        gemm(o, cols, rows, g, false, &col, true, 1.0, &mut d_kernels);
        gemm(rows, o, cols, kernels.data(), true, g, false, 0.0, &mut dcol);
        plan.scatter_add(&dcol, &mut d_input[b * in_n..(b + 1) * in_n]);
        for (oc, chunk) in g.chunks(cols).enumerate() {
            d_bias[oc] += chunk.iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), d_input)?,
        kernels: Tensor::new(kernels.shape().to_vec(), d_kernels)?,
        bias: Tensor::new(vec![o], d_bias.into_iter().map(|v| v as f32).collect())?,
    })
}

fn conv_transpose_plan(
    op: &'static str,
    input: &Tensor,
    kernels: &Tensor,
    geom: ConvGeom,
    output_padding: usize,
) -> Result<(usize, Im2col)> {
    check_geom(op, geom)?;
    let (_, c, h, w) = input.dims4()?;
    let (i, o, k) = check_kernel(op, kernels)?;
    if i != c {
        return Err(Error::dim(
            op,
            format!("input channel axis has {c} channels but kernel in-channel axis expects {i}"),
        ));
    }
    if output_padding >= geom.stride {
        return Err(Error::InvalidArgument(format!(
            "{op}: output padding {output_padding} must be smaller than stride {}",
            geom.stride
        )));
    }
    let out_h = conv_transpose_out_extent(h, k, geom.stride, geom.padding, output_padding)
        .ok_or_else(|| Error::dim(op, format!("height {h} collapses under padding {}", geom.padding)))?;
    let out_w = conv_transpose_out_extent(w, k, geom.stride, geom.padding, output_padding)
        .ok_or_else(|| Error::dim(op, format!("width {w} collapses under padding {}", geom.padding)))?;
    // The im2col plan describes the forward convolution that this op is the
    // adjoint of: it maps the (larger) output back to the input grid.
    Ok((
        o,
        Im2col {
            channels: o,
            height: out_h,
            width: out_w,
            k,
            stride: geom.stride,
            padding: geom.padding,
            out_h: h,
            out_w: w,
        },
    ))
}

/// Transposed convolution: input `B×I×H×W`, kernels `I×O×K×K`, bias `O`.
///
/// Output extent is `(H−1)·stride − 2·padding + K + output_padding`.
pub fn conv_transpose2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    geom: ConvGeom,
    output_padding: usize,
) -> Result<Tensor> {
    let (o, plan) = conv_transpose_plan("conv_transpose2d", input, kernels, geom, output_padding)?;
    check_bias("conv_transpose2d", bias, o)?;
    let (batch, cin) = (input.shape()[0], input.shape()[1]);
    let (rows, cols) = (plan.rows(), plan.cols());
    let out_n = o * plan.height * plan.width;
    let mut dcol = vec![0.0f32; rows * cols];
    let mut out = vec![0.0f32; batch * out_n];
    for b in 0..batch {
        let x = &input.data()[b * cin * cols..(b + 1) * cin * cols];
        gemm(rows, cin, cols, kernels.data(), true, x, false, 0.0, &mut dcol);
        let dst = &mut out[b * out_n..(b + 1) * out_n];
        plan.scatter_add(&dcol, dst);
        for (oc, chunk) in dst.chunks_mut(plan.height * plan.width).enumerate() {
            let bv = bias.data()[oc];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
    }
    Tensor::new(vec![batch, o, plan.height, plan.width], out)
}

pub fn conv_transpose2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    geom: ConvGeom,
    output_padding: usize,
) -> Result<ConvGrads> {
    let (o, plan) = conv_transpose_plan("conv_transpose2d_backward", input, kernels, geom, output_padding)?;
    let (batch, cin) = (input.shape()[0], input.shape()[1]);
    if grad_out.shape() != [batch, o, plan.height, plan.width] {
        return Err(Error::dim(
            "conv_transpose2d_backward",
            format!(
                "output gradient {:?} does not match forward output {:?}",
                grad_out.shape(),
                [batch, o, plan.height, plan.width]
            ),
        ));
    }
    let (rows, cols) = (plan.rows(), plan.cols());
    let out_n = o * plan.height * plan.width;
    let mut col = vec![0.0f32; rows * cols];
    let mut d_input = vec![0.0f32; batch * cin * cols];
    let mut d_kernels = vec![0.0f32; cin * rows];
    let mut d_bias = vec![0.0f64; o];
    for b in 0..batch {
        let g = &grad_out.data()[b * out_n..(b + 1) * out_n];
        plan.gather(g, &mut col);
        let x = &input.data()[b * cin * cols..(b + 1) * cin * cols];
        gemm(cin, rows, cols, kernels.data(), false, &col, false, 0.0, &mut d_input[b * cin * cols..(b + 1) * cin * cols]);
        gemm(cin, cols, rows, x, false, &col, true, 1.0, &mut d_kernels);
        for (oc, chunk) in g.chunks(plan.height * plan.width).enumerate() {
            d_bias[oc] += chunk.iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), d_input)?,
        kernels: Tensor::new(kernels.shape().to_vec(), d_kernels)?,
        bias: Tensor::new(vec![o], d_bias.into_iter().map(|v| v as f32).collect())?,
    })
}

/// NaN inputs pass through so divergence reaches the loss.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 || v.is_nan() { v } else { 0.0 })
}

/// Backward of ReLU expressed through its forward output.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.zip_map(grad_out, |y, g| if y > 0.0 { g } else { 0.0 })
}

#[inline]
pub fn sigmoid_scalar(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    output.zip_map(grad_out, |y, g| g * y * (1.0 - y))
}

/// Mean over all elements of `(z − x)²`.
pub fn mse_loss(z: &Tensor, x: &Tensor) -> Result<f64> {
    z.expect_same_shape(x, "mse_loss")?;
    let sum: f64 = z
        .data()
        .iter()
        .zip(x.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / z.len() as f64)
}

/// Gradient of `scale · mse_loss(z, x)` with respect to `z`.
pub fn mse_loss_backward(z: &Tensor, x: &Tensor, scale: f64) -> Result<Tensor> {
    let factor = 2.0 * scale / z.len() as f64;
    z.zip_map(x, |a, b| ((a as f64 - b as f64) * factor) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct quadruple-loop cross-correlation in f64.
    fn naive_conv2d(x: &Tensor, w: &Tensor, bias: &Tensor, s: usize, p: usize) -> Vec<f64> {
        let (b, c, h, wd) = x.dims4().unwrap();
        let (o, _, k, _) = w.dims4().unwrap();
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (wd + 2 * p - k) / s + 1;
        let mut out = vec![0.0f64; b * o * oh * ow];
        for n in 0..b {
            for oc in 0..o {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = bias.data()[oc] as f64;
                        for ic in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (y * s + ki) as isize - p as isize;
                                    let ix = (xx * s + kj) as isize - p as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((n * c + ic) * h + iy as usize) * wd + ix as usize];
                                    let wv = w.data()[((oc * c + ic) * k + ki) * k + kj];
                                    acc += xv as f64 * wv as f64;
                                }
                            }
                        }
                        out[((n * o + oc) * oh + y) * ow + xx] = acc;
                    }
                }
            }
        }
        out
    }

    /// Naive scatter-add transposed convolution in f64.
    fn naive_conv_transpose(x: &Tensor, w: &Tensor, s: usize, p: usize, op: usize) -> (Vec<usize>, Vec<f64>) {
        let (b, ci, h, wd) = x.dims4().unwrap();
        let (_, co, k, _) = w.dims4().unwrap();
        let oh = (h - 1) * s + k + op - 2 * p;
        let ow = (wd - 1) * s + k + op - 2 * p;
        let mut out = vec![0.0f64; b * co * oh * ow];
        for n in 0..b {
            for ic in 0..ci {
                for y in 0..h {
                    for xx in 0..wd {
                        let v = x.data()[((n * ci + ic) * h + y) * wd + xx] as f64;
                        for oc in 0..co {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let ty = (y * s + ki) as isize - p as isize;
                                    let tx = (xx * s + kj) as isize - p as isize;
                                    if ty < 0 || tx < 0 || ty >= oh as isize || tx >= ow as isize {
                                        continue;
                                    }
                                    let wv = w.data()[((ic * co + oc) * k + ki) * k + kj] as f64;
                                    out[((n * co + oc) * oh + ty as usize) * ow + tx as usize] += v * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        (vec![b, co, oh, ow], out)
    }

    fn identity_kernel(k: usize) -> Tensor {
        let mut w = Tensor::zeros(&[1, 1, k, k]);
        w.data_mut()[(k / 2) * k + k / 2] = 1.0;
        w
    }

    #[test]
    fn conv2d_identity_kernel_copies_input() {
        let x = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f32 * 0.5 - 1.0);
        let y = conv2d(&x, &identity_kernel(3), &Tensor::zeros(&[1]), ConvGeom { stride: 1, padding: 1 }).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv2d_scalar_case() {
        let x = Tensor::full(&[1, 1, 1, 1], 3.0);
        let w = Tensor::full(&[1, 1, 1, 1], -2.0);
        let b = Tensor::full(&[1], 0.5);
        let y = conv2d(&x, &w, &b, ConvGeom { stride: 1, padding: 0 }).unwrap();
        assert_eq!(y.data(), &[3.0 * -2.0 + 0.5]);
    }

    #[test]
    fn conv2d_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&[2, 3, 8, 8], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        let y = conv2d(&x, &w, &b, ConvGeom { stride: 2, padding: 1 }).unwrap();
        assert_eq!(y.shape(), &[2, 4, 4, 4]);
        let oracle = naive_conv2d(&x, &w, &b, 2, 1);
        for (a, e) in y.data().iter().zip(&oracle) {
            assert!((*a as f64 - e).abs() < 1e-5, "{a} vs {e}");
        }
    }

    #[test]
    fn conv2d_reports_offending_axes() {
        let x = Tensor::zeros(&[1, 2, 5, 5]);
        let w = Tensor::zeros(&[4, 3, 3, 3]);
        let err = conv2d(&x, &w, &Tensor::zeros(&[4]), ConvGeom { stride: 1, padding: 0 }).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("channel"), "{msg}");
        let w_even = Tensor::zeros(&[4, 2, 2, 2]);
        assert!(conv2d(&x, &w_even, &Tensor::zeros(&[4]), ConvGeom { stride: 1, padding: 0 }).is_err());
        let w = Tensor::zeros(&[4, 2, 3, 3]);
        assert!(conv2d(&x, &w, &Tensor::zeros(&[3]), ConvGeom { stride: 1, padding: 0 }).is_err());
    }

    #[test]
    fn conv_transpose_identity_kernel_copies_input() {
        let x = Tensor::from_fn(&[1, 1, 4, 5], |i| i as f32);
        let y = conv_transpose2d(&x, &identity_kernel(3), &Tensor::zeros(&[1]), ConvGeom { stride: 1, padding: 1 }, 0)
            .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_transpose_matches_scatter_add_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[2, 3, 5, 4], &mut rng);
        let w = random(&[3, 2, 3, 3], &mut rng);
        for (s, p, op) in [(1, 1, 0), (2, 1, 1), (2, 0, 0), (3, 1, 2)] {
            let y = conv_transpose2d(&x, &w, &Tensor::zeros(&[2]), ConvGeom { stride: s, padding: p }, op).unwrap();
            let (shape, oracle) = naive_conv_transpose(&x, &w, s, p, op);
            assert_eq!(y.shape(), &shape[..]);
            for (a, e) in y.data().iter().zip(&oracle) {
                assert!((*a as f64 - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn conv_transpose_ones_stride_two_tiles_output() {
        let x = Tensor::full(&[1, 1, 2, 2], 1.0);
        let w = Tensor::full(&[1, 1, 2, 2], 1.0);
        let (shape, oracle) = naive_conv_transpose(&x, &w, 2, 0, 0);
        let y = conv_transpose2d(&x, &w, &Tensor::zeros(&[1]), ConvGeom { stride: 2, padding: 0 }, 0).unwrap();
        assert_eq!(y.shape(), &shape[..]);
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
        assert!(oracle.iter().all(|&v| v == 1.0));
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn relu_and_sigmoid_values() {
        let x = Tensor::new(vec![2], vec![-2.0, 3.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 3.0]);
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let tiny = sigmoid_scalar(-50.0);
        assert!(tiny > 0.0 && tiny < 1e-6);
        for v in [-1000.0f32, -88.0, 88.0, 1000.0] {
            let s = sigmoid_scalar(v);
            assert!(!s.is_nan() && (0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn mse_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 3, 4, 4], &mut rng);
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        let z = x.map(|v| v + 1.0);
        assert!((mse_loss(&z, &x).unwrap() - 1.0).abs() < 1e-6);
        let z = random(&[2, 3, 4, 4], &mut rng);
        let mut acc = 0.0f64;
        for i in 0..z.len() {
            let d = z.data()[i] as f64 - x.data()[i] as f64;
            acc += d * d;
        }
        let oracle = acc / 96.0;
        assert!((mse_loss(&z, &x).unwrap() - oracle).abs() <= 1e-6 * oracle);
        assert!(mse_loss(&z, &Tensor::zeros(&[2, 3, 4, 3])).is_err());
    }
}
