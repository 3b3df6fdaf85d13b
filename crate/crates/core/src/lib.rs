//! Numerical core for measuring critic divergences of GANs on synthetic 2-D data.
//!
//! A small tape-based reverse-mode autodiff engine drives spectrally normalized
//! MLP critics, batch-normalized generators, Adam and SGD. On top of that sit the
//! WGAN training loop (original plus auxiliary critic), the post-hoc independent
//! critic trainer, and divergence and Fréchet metrics.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod seed;
pub mod tensor;
pub mod train;
pub mod verify;

pub use autodiff::{Tape, Var};
pub use error::{Error, Result, TensorError};
pub use tensor::Tensor;
