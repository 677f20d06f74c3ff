//! Minimal convolutional network engine with hand-written backpropagation.
//!
//! Networks are plain sequential stacks evaluated one sample at a time.
//! All parameters of a network live in one flat buffer so optimizers,
//! checkpoints and identity hashes can treat them uniformly.

mod adam;
mod network;

pub use adam::{Adam, AdamConfig};
pub use network::{LayerKind, Network, NetworkBuilder, Trace};

/// Channel-major activation shape (`channels × height × width`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    /// A flat vector of `n` values.
    pub const fn vector(n: usize) -> Self {
        Self::new(n, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
