//! Wall-clock cost of one training step on a 128-image MNIST-sized batch.
//!
//! `cargo run --release -p lapdae --example step_timing`

use std::time::Instant;

use lapdae::model::{Architecture, ModelParams};
use lapdae::optim::{adam_step, corrupt_batch, step_gradients, AdamState, NoiseSpace, TrainConfig};
use lapdae::Tensor;

fn main() -> lapdae::Result<()> {
    let mut params = ModelParams::init(&Architecture::lapdae(1), 0)?;
    let mut state = AdamState::for_params(&params);
    let x = Tensor::from_fn(&[128, 1, 28, 28], |i| ((i * 7919) % 255) as f32 / 255.0);
    let cfg = TrainConfig::default();
    let idx: Vec<usize> = (0..128).collect();
    let steps = 10;
    let (mut corrupt, mut grad, mut update) = (0.0, 0.0, 0.0);
    for step in 0..steps {
        let t = Instant::now();
        let batch = corrupt_batch(&x, &idx, step, &cfg, NoiseSpace::Laplacian)?;
        corrupt += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let (_, g) = step_gradients(&params, &x, &batch.inputs, cfg.corruptions.len())?;
        grad += t.elapsed().as_secs_f64();
        let t = Instant::now();
        adam_step(&mut params, &g, &mut state, cfg.base_lr)?;
        update += t.elapsed().as_secs_f64();
    }
    let ms = |s: f64| 1e3 * s / steps as f64;
    println!(
        "per step: corrupt {:.1} ms, forward+backward {:.1} ms, adam {:.1} ms",
        ms(corrupt),
        ms(grad),
        ms(update)
    );
    Ok(())
}
