mod support;

use lapdae::pyramid::{
    gaussian_pyramid, lap_corrupt, laplacian_pyramid, max_levels, reconstruct, CorruptionSpec, LevelChoice,
};
use proptest::prelude::*;
use support::{random_tensor, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collapse_inverts_decomposition(seed in any::<u64>(), h in 1usize..40, w in 1usize..40, c in 1usize..4, depth in 1usize..7) {
        let x = random_tensor(&[1, c, h, w], &mut rng(seed), 0.0, 1.0);
        let depth = depth.min(max_levels(h, w));
        let p = laplacian_pyramid(&x, depth).unwrap();
        prop_assert_eq!(p.num_levels(), depth);
        let back = reconstruct(&p).unwrap();
        prop_assert!(back.max_abs_diff(&x).unwrap() < 1e-5);
    }

    #[test]
    fn level_extents_halve_rounding_up(h in 1usize..70, w in 1usize..70) {
        let x = lapdae::Tensor::zeros(&[1, 1, h, w]);
        let g = gaussian_pyramid(&x, max_levels(h, w)).unwrap();
        let (mut eh, mut ew) = (h, w);
        for level in g.levels() {
            prop_assert_eq!(&level.shape()[2..], &[eh, ew]);
            eh = eh.div_ceil(2);
            ew = ew.div_ceil(2);
        }
        let top = g.levels().last().unwrap();
        prop_assert!(top.shape()[2].min(top.shape()[3]) <= 2);
    }

    #[test]
    fn corruption_stays_in_range_and_is_seeded(seed in any::<u64>(), level in 0usize..5, sigma in 0.0f32..80.0) {
        let x = random_tensor(&[1, 1, 28, 28], &mut rng(seed), 0.0, 1.0);
        let spec = CorruptionSpec::gaussian(sigma, LevelChoice::Fixed(level), seed);
        let (a, la) = lap_corrupt(&x, &spec, 5).unwrap();
        let (b, lb) = lap_corrupt(&x, &spec, 5).unwrap();
        prop_assert_eq!(la, level);
        prop_assert_eq!(lb, level);
        prop_assert_eq!(a.data(), b.data());
        prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn random_level_is_within_pyramid(seed in any::<u64>()) {
        let x = random_tensor(&[1, 1, 28, 28], &mut rng(seed), 0.0, 1.0);
        let (_, level) = lap_corrupt(&x, &CorruptionSpec::gaussian(25.0, LevelChoice::Random, seed), 5).unwrap();
        prop_assert!(level < 5);
    }
}

#[test]
fn negligible_noise_leaves_image_unchanged() {
    let x = random_tensor(&[1, 1, 28, 28], &mut rng(4), 0.0, 1.0);
    for level in 0..5 {
        let (out, _) = lap_corrupt(&x, &CorruptionSpec::gaussian(1e-4, LevelChoice::Fixed(level), 9), 5).unwrap();
        assert!(out.max_abs_diff(&x).unwrap() < 1e-3);
    }
}

#[test]
fn random_levels_cover_every_band() {
    let x = random_tensor(&[1, 1, 32, 32], &mut rng(8), 0.0, 1.0);
    let mut seen = [0usize; 6];
    for seed in 0..600 {
        let (_, l) = lap_corrupt(&x, &CorruptionSpec::gaussian(25.0, LevelChoice::Random, seed), 6).unwrap();
        seen[l] += 1;
    }
    assert!(seen.iter().all(|&n| n > 60), "{seen:?}");
}
