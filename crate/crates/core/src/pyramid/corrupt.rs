use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{laplacian_pyramid, reconstruct};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::tensor::Tensor;

/// Noise scales are quoted on the 8-bit pixel scale; images live in `[0, 1]`.
pub const PIXEL_SCALE: f32 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelChoice {
    /// Uniform over every level, the top residual included.
    Random,
    Fixed(usize),
}

/// One corruption draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub level: LevelChoice,
    /// Noise standard deviation on the 0–255 pixel scale.
    pub sigma: f32,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec::gaussian(25.0, LevelChoice::Random, 0)
    }
}

impl CorruptionSpec {
    pub fn gaussian(sigma: f32, level: LevelChoice, seed: u64) -> Self {
        CorruptionSpec {
            kind: CorruptionKind::GaussianNoise,
            level,
            sigma,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        CorruptionSpec { seed, ..self }
    }

    /// Standard deviation in normalized `[0, 1]` units.
    pub fn std(&self) -> f32 {
        self.sigma / PIXEL_SCALE
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "corruption sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

fn add_noise(t: &mut Tensor, std: f32, rng: &mut impl Rng) {
    for v in t.data_mut() {
        let z: f32 = rng.sample(StandardNormal);
        *v += std * z;
    }
}

fn clamp_unit(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Corrupt one Laplacian level of `x` and collapse the pyramid back to an image.
///
/// Returns the corrupted image, clamped to `[0, 1]`, and the level that was
/// actually perturbed.
pub fn lap_corrupt(x: &Tensor, spec: &CorruptionSpec, num_levels: usize) -> Result<(Tensor, usize)> {
    spec.validate()?;
    let mut lap = laplacian_pyramid(x, num_levels)?;
    let top = lap.top();
    let mut rng = rng_for(spec.seed, &[]);
    let level = match spec.level {
        LevelChoice::Random => rng.random_range(0..=top),
        LevelChoice::Fixed(l) if l <= top => l,
        LevelChoice::Fixed(l) => {
            return Err(Error::InvalidArgument(format!(
                "corruption level {l} outside the valid range 0..={top}"
            )))
        }
    };
    match spec.kind {
        CorruptionKind::GaussianNoise => add_noise(&mut lap.levels_mut()[level], spec.std(), &mut rng),
    }
    let mut out = reconstruct(&lap)?;
    clamp_unit(&mut out);
    Ok((out, level))
}

/// Conventional pixel-space corruption: i.i.d. Gaussian noise, clamped to `[0, 1]`.
///
/// `sigma` is on the 0–255 scale.
pub fn spatial_corrupt(x: &Tensor, sigma: f32, seed: u64) -> Result<Tensor> {
    CorruptionSpec::gaussian(sigma, LevelChoice::Fixed(0), seed).validate()?;
    let mut out = x.clone();
    let mut rng = rng_for(seed, &[]);
    add_noise(&mut out, sigma / PIXEL_SCALE, &mut rng);
    clamp_unit(&mut out);
    Ok(out)
}

/// Pixel noise without clamping, for statistics that must not see the clip.
#[cfg(test)]
fn spatial_noise_unclamped(x: &Tensor, sigma: f32, seed: u64) -> Tensor {
    let mut out = x.clone();
    let mut rng = rng_for(seed, &[]);
    add_noise(&mut out, sigma / PIXEL_SCALE, &mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::analysis::autocorrelation_length;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn digit_like(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[1, 1, 28, 28], |_| if rng.random_bool(0.2) { rng.random_range(0.5..1.0) } else { 0.0 })
    }

    #[test]
    fn vanishing_sigma_is_identity() {
        let x = digit_like(1);
        for level in 0..5 {
            let spec = CorruptionSpec::gaussian(1e-4, LevelChoice::Fixed(level), 9);
            let (y, l) = lap_corrupt(&x, &spec, 5).unwrap();
            assert_eq!(l, level);
            assert!(y.max_abs_diff(&x).unwrap() < 1e-4);
        }
        let y = spatial_corrupt(&x, 1e-4, 3).unwrap();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-4);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let x = digit_like(2);
        let spec = CorruptionSpec::gaussian(25.0, LevelChoice::Random, 77);
        let a = lap_corrupt(&x, &spec, 5).unwrap();
        let b = lap_corrupt(&x, &spec, 5).unwrap();
        assert_eq!(a, b);
        let c = lap_corrupt(&x, &spec.with_seed(78), 5).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let x = digit_like(3);
        assert!(lap_corrupt(&x, &CorruptionSpec::gaussian(0.0, LevelChoice::Random, 0), 5).is_err());
        assert!(lap_corrupt(&x, &CorruptionSpec::gaussian(25.0, LevelChoice::Fixed(5), 0), 5).is_err());
        assert!(spatial_corrupt(&x, -1.0, 0).is_err());
    }

    #[test]
    fn random_level_covers_every_level() {
        let x = digit_like(4);
        let mut seen = [0usize; 5];
        for seed in 0..200 {
            let (_, l) = lap_corrupt(&x, &CorruptionSpec::gaussian(25.0, LevelChoice::Random, seed), 5).unwrap();
            seen[l] += 1;
        }
        assert!(seen.iter().all(|&n| n > 20), "{seen:?}");
    }

    #[test]
    fn coarse_corruption_is_spatially_smoother() {
        let x = Tensor::full(&[1, 1, 64, 64], 0.5);
        let mean_len = |level: usize| -> f64 {
            (0..100)
                .map(|seed| {
                    let spec = CorruptionSpec::gaussian(25.0, LevelChoice::Fixed(level), seed);
                    let (y, _) = lap_corrupt(&x, &spec, 5).unwrap();
                    let diff = y.zip_map(&x, |a, b| a - b).unwrap();
                    autocorrelation_length(diff.data(), 64, 64)
                })
                .sum::<f64>()
                / 100.0
        };
        let (l0, l3) = (mean_len(0), mean_len(3));
        assert!(l3 >= 4.0 * l0, "level-3 length {l3} vs level-0 length {l0}");
    }

    #[test]
    fn level_zero_changes_rms_on_the_order_of_sigma() {
        let x = Tensor::full(&[1, 1, 32, 32], 0.5);
        let spec = CorruptionSpec::gaussian(25.0, LevelChoice::Fixed(0), 5);
        let (y, _) = lap_corrupt(&x, &spec, 5).unwrap();
        let rms = (y.zip_map(&x, |a, b| (a - b) * (a - b)).unwrap().mean()).sqrt();
        let std = spec.std() as f64;
        assert!(rms > 0.8 * std && rms < 1.2 * std, "rms {rms} vs std {std}");
        for level in 1..5 {
            let (y, _) = lap_corrupt(&x, &spec.with_seed(6).clone_with_level(level), 5).unwrap();
            let rms = (y.zip_map(&x, |a, b| (a - b) * (a - b)).unwrap().mean()).sqrt();
            assert!(rms > 0.0);
        }
    }

    impl CorruptionSpec {
        fn clone_with_level(self, level: usize) -> Self {
            CorruptionSpec {
                level: LevelChoice::Fixed(level),
                ..self
            }
        }
    }

    #[test]
    fn spatial_noise_mean_is_near_zero() {
        let x = Tensor::full(&[1, 1, 256, 256], 0.5);
        let sigma = 25.0;
        let y = spatial_corrupt(&x, sigma, 11).unwrap();
        let mean = y.zip_map(&x, |a, b| a - b).unwrap().mean();
        let bound = 3.0 * (sigma / PIXEL_SCALE) as f64 / 256.0;
        assert!(mean.abs() < bound, "mean {mean} exceeds {bound}");
    }

    #[test]
    fn spatial_noise_per_pixel_std_matches_sigma() {
        let x = Tensor::full(&[1, 1, 4, 4], 0.5);
        let sigma = 25.0;
        let draws = 10_000;
        let mut sum = [0.0f64; 16];
        let mut sq = [0.0f64; 16];
        for seed in 0..draws {
            let y = spatial_noise_unclamped(&x, sigma, seed);
            for (i, v) in y.data().iter().enumerate() {
                let d = (*v - 0.5) as f64;
                sum[i] += d;
                sq[i] += d * d;
            }
        }
        let target = (sigma / PIXEL_SCALE) as f64;
        for i in 0..16 {
            let m = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - m * m;
            assert!((var.sqrt() - target).abs() < 0.05 * target);
        }
        // At σ=25 a mid-range pixel is essentially never clamped.
        let y = spatial_corrupt(&x, sigma, 0).unwrap();
        assert_eq!(y, spatial_noise_unclamped(&x, sigma, 0));
    }
}
