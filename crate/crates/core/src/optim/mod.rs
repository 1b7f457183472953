//! Adam and the denoising training loop.

mod adam;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::*;
