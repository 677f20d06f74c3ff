//! Numerical core of the affect pipeline.
//!
//! * [`dsp`]: resampling, one-second chunking and normalised STFT tiles.
//! * [`nn`]: sequential convolutional networks with manual backpropagation.
//! * [`began`]: boundary-equilibrium GAN whose autoencoder discriminator
//!   provides the audio representation.
//! * [`affect`]: arousal/valence regression head over the frozen encoder.
//! * [`eval`]: median aggregation, concordance correlation, box-plot stats.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature
//! for runtime SIMD detection in the matrix kernels.

#![no_std]

extern crate alloc;

pub mod affect;
pub mod began;
pub mod dsp;
mod error;
pub mod eval;
pub mod nn;
mod real;

pub use error::{Error, Result};
pub use real::{gemm, MatRef, Real};
