mod support;

use lapdae::model::{reconstruct, Architecture, ModelParams};
use support::{random_tensor, rng, Arr};

#[test]
fn forward_pass_matches_oracle() {
    for arch in [Architecture::tiny(1), Architecture::lapdae(1)] {
        let params = ModelParams::init(&arch, 5).unwrap();
        let x = random_tensor(&[2, 1, 12, 12], &mut rng(1), 0.0, 1.0);
        let got = reconstruct(&params, &x).unwrap();
        let want = support::forward(&params, &support::theta_of(&params), &Arr::from_tensor(&x));
        assert_eq!(got.shape(), &want.shape[..]);
        for (a, b) in got.data().iter().zip(&want.data) {
            assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn tiny_model_gradients_match_finite_differences() {
    for seed in [1, 2] {
        let check = support::gradient_check(seed, 1e-3, 1e-3);
        let frac = check.within as f64 / check.checked as f64;
        assert!(frac >= 0.99, "seed {seed}: {}/{} within tolerance, worst {}", check.within, check.checked, check.worst);
        assert!(check.checked > check.straddling, "too few smooth coordinates");
    }
}
