//! Laplacian-pyramid denoising autoencoder.
//!
//! Training corrupts one randomly chosen level of each image's Laplacian
//! pyramid, collapses the pyramid back to an image and asks a small
//! convolutional autoencoder to recover the clean input. The crate carries its
//! own CPU tensor kernels and reverse-mode tape, the data loaders, the
//! optimizer, an evaluation harness and the `lapdae` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod image_io;
pub mod kernels;
pub mod model;
pub mod optim;
pub mod pyramid;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, ErrorClass, Result};
pub use tensor::Tensor;
