//! Run configuration: defaults, TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use affectgan_core::affect::HeadConfig;
use affectgan_core::began::BeganConfig;
use affectgan_core::dsp::{FFT_SIZE, HOP, SAMPLE_RATE};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeganSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub lambda_k: f64,
    pub lr: f64,
}

impl Default for BeganSection {
    fn default() -> Self {
        let d = BeganConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            gamma: d.gamma,
            lambda_k: d.lambda_k,
            lr: d.lr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for HeadSection {
    fn default() -> Self {
        let d = HeadConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
        }
    }
}

/// Artifact locations, relative to the working directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub manifest: PathBuf,
    pub store: PathBuf,
    pub began: PathBuf,
    pub head: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "corpus".into(),
            manifest: "corpus/manifest.csv".into(),
            store: "store".into(),
            began: "began".into(),
            head: "head".into(),
            report: "report".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub chunk_seconds: u32,
    pub fft_size: usize,
    pub hop: usize,
    pub seed: u64,
    pub began: BeganSection,
    pub head: HeadSection,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            chunk_seconds: 1,
            fft_size: FFT_SIZE,
            hop: HOP,
            seed: 0,
            began: BeganSection::default(),
            head: HeadSection::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Defaults overlaid with `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fixed = [
            ("sample_rate", self.sample_rate as usize, SAMPLE_RATE as usize),
            ("chunk_seconds", self.chunk_seconds as usize, 1),
            ("fft_size", self.fft_size, FFT_SIZE),
            ("hop", self.hop, HOP),
        ];
        for (name, got, want) in fixed {
            if got != want {
                return Err(Error::Config(format!("{name} is fixed at {want}, got {got}")));
            }
        }
        self.began_config().validate()?;
        self.head_config(self.seed).validate()?;
        Ok(())
    }

    pub fn began_config(&self) -> BeganConfig {
        let b = &self.began;
        BeganConfig {
            epochs: b.epochs,
            batch_size: b.batch_size,
            gamma: b.gamma,
            lambda_k: b.lambda_k,
            lr: b.lr,
            seed: self.seed,
        }
    }

    pub fn head_config(&self, seed: u64) -> HeadConfig {
        HeadConfig {
            epochs: self.head.epochs,
            batch_size: self.head.batch_size,
            lr: self.head.lr,
            seed,
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }
}
