//! Gaussian and Laplacian image pyramids.
//!
//! The low-pass filter is the separable 5-tap binomial `(1, 4, 6, 4, 1)/16`
//! with reflect-101 borders. Downsampling keeps the even-indexed samples, so a
//! level with extent `n` has a parent of extent `ceil(n/2)`. Upsampling inserts
//! zeros up to the recorded finer extent and filters with the same kernel
//! scaled by 4, which has unit DC gain for every extent, odd or even.
//!
//! Every operation acts on each `(sample, channel)` plane of a `BCHW` tensor
//! independently.

pub mod analysis;
mod corrupt;

pub use corrupt::{lap_corrupt, spatial_corrupt, CorruptionKind, CorruptionSpec, LevelChoice, PIXEL_SCALE};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TAPS: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Gaussian,
    Laplacian,
}

impl Flavor {
    fn name(self) -> &'static str {
        match self {
            Flavor::Gaussian => "gaussian",
            Flavor::Laplacian => "laplacian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<Tensor>,
    flavor: Flavor,
    requested_levels: usize,
}

impl Pyramid {
    /// Assemble a pyramid from explicit levels, checking the `ceil(n/2)` chain.
    pub fn from_levels(levels: Vec<Tensor>, flavor: Flavor) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("pyramid needs at least one level".into()));
        }
        let (b, c, _, _) = levels[0].dims4()?;
        for pair in levels.windows(2) {
            let (_, _, h, w) = pair[0].dims4()?;
            let (nb, nc, nh, nw) = pair[1].dims4()?;
            if (nb, nc, nh, nw) != (b, c, h.div_ceil(2), w.div_ceil(2)) {
                return Err(Error::dim(
                    "pyramid",
                    format!("level {:?} is not the half-extent parent of {:?}", pair[1].shape(), pair[0].shape()),
                ));
            }
        }
        let requested_levels = levels.len();
        Ok(Pyramid {
            levels,
            flavor,
            requested_levels,
        })
    }

    pub fn levels(&self) -> &[Tensor] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [Tensor] {
        &mut self.levels
    }

    pub fn level(&self, l: usize) -> &Tensor {
        &self.levels[l]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Index of the coarsest level.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// Spatial extents of level 0.
    pub fn base_shape(&self) -> (usize, usize) {
        let s = self.levels[0].shape();
        (s[2], s[3])
    }

    /// Set when the requested depth exceeded what the image extent allows.
    pub fn clamp_warning(&self) -> Option<String> {
        (self.requested_levels > self.levels.len()).then(|| {
            format!(
                "requested {} pyramid levels but a {}x{} image supports at most {}; clamped",
                self.requested_levels,
                self.base_shape().0,
                self.base_shape().1,
                self.levels.len()
            )
        })
    }
}

/// Deepest pyramid an `h × w` image supports: `floor(log2(min(h, w))) + 1`.
pub fn max_levels(h: usize, w: usize) -> usize {
    let m = h.min(w).max(1);
    (usize::BITS - 1 - m.leading_zeros()) as usize + 1
}

fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable binomial blur of one `h × w` plane, multiplied by `gain`.
fn blur_plane(src: &[f32], h: usize, w: usize, gain: f32) -> Vec<f32> {
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (t, &k) in TAPS.iter().enumerate() {
                acc += k * row[reflect(x as isize + t as isize - 2, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (t, &k) in TAPS.iter().enumerate() {
                acc += k * tmp[reflect(y as isize + t as isize - 2, h) * w + x];
            }
            out[y * w + x] = acc * gain;
        }
    }
    out
}

fn for_each_plane(x: &Tensor, out_h: usize, out_w: usize, f: impl Fn(&[f32]) -> Vec<f32>) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let mut data = Vec::with_capacity(b * c * out_h * out_w);
    for plane in x.data().chunks(h * w) {
        data.extend(f(plane));
    }
    Tensor::new(vec![b, c, out_h, out_w], data)
}

/// Low-pass filter then keep even-indexed samples: `n → ceil(n/2)`.
pub fn downsample(x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    for_each_plane(x, oh, ow, |plane| {
        let blurred = blur_plane(plane, h, w, 1.0);
        let mut out = Vec::with_capacity(oh * ow);
        for y in 0..oh {
            for xx in 0..ow {
                out.push(blurred[2 * y * w + 2 * xx]);
            }
        }
        out
    })
}

/// Zero-insert to `target_h × target_w` and low-pass with gain 4.
pub fn upsample(x: &Tensor, target_h: usize, target_w: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if target_h.div_ceil(2) != h || target_w.div_ceil(2) != w {
        return Err(Error::dim(
            "upsample",
            format!("{h}x{w} is not the half-extent parent of target {target_h}x{target_w}"),
        ));
    }
    for_each_plane(x, target_h, target_w, |plane| {
        let mut sparse = vec![0.0f32; target_h * target_w];
        for y in 0..h {
            for xx in 0..w {
                sparse[2 * y * target_w + 2 * xx] = plane[y * w + xx];
            }
        }
        blur_plane(&sparse, target_h, target_w, 4.0)
    })
}

fn effective_levels(x: &Tensor, num_levels: usize) -> Result<(usize, usize)> {
    if num_levels == 0 {
        return Err(Error::InvalidArgument("num_levels must be at least 1".into()));
    }
    let (_, _, h, w) = x.dims4()?;
    let feasible = max_levels(h, w);
    if num_levels > feasible {
        log::debug!("pyramid depth {num_levels} clamped to {feasible} for a {h}x{w} image");
    }
    Ok((num_levels.min(feasible), num_levels))
}

/// Gaussian pyramid with level 0 equal to `x`.
pub fn gaussian_pyramid(x: &Tensor, num_levels: usize) -> Result<Pyramid> {
    let (levels_n, requested_levels) = effective_levels(x, num_levels)?;
    let mut levels = Vec::with_capacity(levels_n);
    levels.push(x.clone());
    for l in 1..levels_n {
        let next = downsample(&levels[l - 1])?;
        levels.push(next);
    }
    Ok(Pyramid {
        levels,
        flavor: Flavor::Gaussian,
        requested_levels,
    })
}

/// Laplacian pyramid: band `l` is `G_l − upsample(G_{l+1})`, the top level is `G_N`.
pub fn laplacian_pyramid(x: &Tensor, num_levels: usize) -> Result<Pyramid> {
    let gauss = gaussian_pyramid(x, num_levels)?;
    laplacian_from_gaussian(&gauss)
}

pub fn laplacian_from_gaussian(gauss: &Pyramid) -> Result<Pyramid> {
    if gauss.flavor != Flavor::Gaussian {
        return Err(Error::Flavor {
            expected: Flavor::Gaussian.name(),
            got: gauss.flavor.name(),
        });
    }
    let top = gauss.top();
    let mut levels = Vec::with_capacity(gauss.num_levels());
    for l in 0..top {
        let (_, _, h, w) = gauss.levels[l].dims4()?;
        let up = upsample(&gauss.levels[l + 1], h, w)?;
        levels.push(gauss.levels[l].zip_map(&up, |a, b| a - b)?);
    }
    levels.push(gauss.levels[top].clone());
    Ok(Pyramid {
        levels,
        flavor: Flavor::Laplacian,
        requested_levels: gauss.requested_levels,
    })
}

/// Collapse a Laplacian pyramid: `G_l = L_l + upsample(G_{l+1})` down to level 0.
pub fn reconstruct(p: &Pyramid) -> Result<Tensor> {
    if p.flavor != Flavor::Laplacian {
        return Err(Error::Flavor {
            expected: Flavor::Laplacian.name(),
            got: p.flavor.name(),
        });
    }
    let mut current = p.levels[p.top()].clone();
    for l in (0..p.top()).rev() {
        let (_, _, h, w) = p.levels[l].dims4()?;
        let up = upsample(&current, h, w)?;
        current = p.levels[l].zip_map(&up, |a, b| a + b)?;
    }
    Ok(current)
}
