//! File formats, checkpoints and pipeline stages around `affectgan-core`.

pub mod checkpoint;
pub mod config;
mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
