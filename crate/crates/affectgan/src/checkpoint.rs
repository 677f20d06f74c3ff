//! BEGAN and head checkpoint directories: raw little-endian parameter
//! payloads plus JSON metadata.

use std::path::{Path, PathBuf};

use affectgan_core::affect::{AffectHead, HeadArch, HeadConfig};
use affectgan_core::began::{BeganArch, BeganConfig, BeganModel, Encoder, EquilibriumState};
use affectgan_core::dsp::NormalizationStats;
use affectgan_core::nn::Shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result};
use crate::store::StatsRecord;

pub const BEGAN_META: &str = "began.json";
pub const HEAD_META: &str = "head.json";
const ENCODER_FILE: &str = "encoder.f32";
const DECODER_FILE: &str = "decoder.f32";
const GENERATOR_FILE: &str = "generator.f32";
const HEAD_FILE: &str = "head.f32";

fn ckpt_err(dir: &Path, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: dir.to_path_buf(),
        message: message.into(),
    }
}

fn to_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_params(path: &Path, values: &[f32]) -> Result<()> {
    std::fs::write(path, to_bytes(values)).at(path)
}

fn read_params(dir: &Path, name: &str, expected: usize) -> Result<Vec<f32>> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).at(&path)?;
    if bytes.len() != expected * 4 {
        return Err(ckpt_err(
            dir,
            format!("{name} holds {} bytes, expected {}", bytes.len(), expected * 4),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, json).at(path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).at(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// SHA-256 over the encoder's little-endian parameter bytes.
pub fn encoder_hash(encoder: &Encoder<f32>) -> String {
    hex::encode(Sha256::digest(to_bytes(&encoder.params())))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl From<Shape> for ShapeRecord {
    fn from(s: Shape) -> Self {
        Self {
            channels: s.channels,
            height: s.height,
            width: s.width,
        }
    }
}

impl From<ShapeRecord> for Shape {
    fn from(s: ShapeRecord) -> Self {
        Shape::new(s.channels, s.height, s.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeganArchRecord {
    pub input: ShapeRecord,
    pub channels: Vec<usize>,
    pub latent_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeganTrainingRecord {
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub lambda_k: f64,
    pub lr: f64,
    pub seed: u64,
}

impl From<&BeganConfig> for BeganTrainingRecord {
    fn from(c: &BeganConfig) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            gamma: c.gamma,
            lambda_k: c.lambda_k,
            lr: c.lr,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub k: f64,
    pub gamma: f64,
    pub lambda_k: f64,
    pub m_global: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeganMeta {
    pub arch: BeganArchRecord,
    pub training: BeganTrainingRecord,
    pub state: EquilibriumRecord,
    pub stats: StatsRecord,
    pub encoder_sha256: String,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct BeganCheckpoint {
    pub model: BeganModel<f32>,
    pub state: EquilibriumState,
    pub stats: NormalizationStats,
    pub meta: BeganMeta,
}

impl BeganCheckpoint {
    pub fn new(
        model: BeganModel<f32>,
        state: EquilibriumState,
        stats: NormalizationStats,
        training: &BeganConfig,
        config: serde_json::Value,
    ) -> Self {
        let arch = &model.arch;
        let meta = BeganMeta {
            arch: BeganArchRecord {
                input: arch.input.into(),
                channels: arch.channels.clone(),
                latent_dim: arch.latent_dim,
            },
            training: training.into(),
            state: EquilibriumRecord {
                k: state.k,
                gamma: state.gamma,
                lambda_k: state.lambda_k,
                m_global: state.m_global,
            },
            stats: stats.into(),
            encoder_sha256: encoder_hash(model.encoder()),
            config,
        };
        Self {
            model,
            state,
            stats,
            meta,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        write_params(&dir.join(ENCODER_FILE), &self.model.encoder().params())?;
        write_params(&dir.join(DECODER_FILE), self.model.discriminator.decoder.params())?;
        write_params(&dir.join(GENERATOR_FILE), self.model.generator.params())?;
        write_json(&dir.join(BEGAN_META), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: BeganMeta = read_json(&dir.join(BEGAN_META))?;
        let arch = BeganArch {
            input: meta.arch.input.into(),
            channels: meta.arch.channels.clone(),
            latent_dim: meta.arch.latent_dim,
        };
        let mut model = BeganModel::<f32>::new(arch, &mut ChaCha8Rng::seed_from_u64(0))?;
        let enc = read_params(dir, ENCODER_FILE, model.encoder().param_count())?;
        model.discriminator.encoder.set_params(enc)?;
        let dec = read_params(dir, DECODER_FILE, model.discriminator.decoder.param_count())?;
        model.discriminator.decoder.set_params(dec)?;
        let gen = read_params(dir, GENERATOR_FILE, model.generator.param_count())?;
        model.generator.set_params(gen)?;
        if encoder_hash(model.encoder()) != meta.encoder_sha256 {
            return Err(ckpt_err(dir, "encoder payload does not match its recorded hash"));
        }
        let s = meta.state;
        let mut state = EquilibriumState::new(s.gamma, s.lambda_k)?;
        state.k = s.k;
        state.m_global = s.m_global;
        let stats = meta.stats.to_stats()?;
        Ok(Self {
            model,
            state,
            stats,
            meta,
        })
    }

    pub fn encoder_hash(&self) -> &str {
        &self.meta.encoder_sha256
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadArchRecord {
    pub input: ShapeRecord,
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadTrainingRecord {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadMeta {
    pub arch: HeadArchRecord,
    pub training: HeadTrainingRecord,
    /// Identity of the encoder whose feature maps the head was fitted on.
    pub encoder_sha256: String,
    pub began_checkpoint: PathBuf,
    pub final_mse: f64,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug)]
pub struct HeadCheckpoint {
    pub head: AffectHead<f32>,
    pub meta: HeadMeta,
}

impl HeadCheckpoint {
    pub fn new(
        head: AffectHead<f32>,
        training: &HeadConfig,
        began: &BeganCheckpoint,
        began_dir: &Path,
        final_mse: f64,
        config: serde_json::Value,
    ) -> Self {
        let a = &head.arch;
        let meta = HeadMeta {
            arch: HeadArchRecord {
                input: a.input.into(),
                conv_channels: a.conv_channels.clone(),
                hidden: a.hidden,
            },
            training: HeadTrainingRecord {
                epochs: training.epochs,
                batch_size: training.batch_size,
                lr: training.lr,
                seed: training.seed,
            },
            encoder_sha256: began.encoder_hash().to_string(),
            began_checkpoint: began_dir.to_path_buf(),
            final_mse,
            config,
        };
        Self { head, meta }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        write_params(&dir.join(HEAD_FILE), self.head.net.params())?;
        write_json(&dir.join(HEAD_META), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: HeadMeta = read_json(&dir.join(HEAD_META))?;
        let arch = HeadArch {
            input: meta.arch.input.into(),
            conv_channels: meta.arch.conv_channels.clone(),
            hidden: meta.arch.hidden,
        };
        let mut head = AffectHead::<f32>::new(arch, &mut ChaCha8Rng::seed_from_u64(0))?;
        let params = read_params(dir, HEAD_FILE, head.net.param_count())?;
        head.net.set_params(params)?;
        Ok(Self { head, meta })
    }

    /// Fails unless the head was trained on `began`'s encoder.
    pub fn check_encoder(&self, began: &BeganCheckpoint, head_dir: &Path) -> Result<()> {
        if self.meta.encoder_sha256 != began.encoder_hash() {
            return Err(ckpt_err(
                head_dir,
                format!(
                    "head was trained against encoder {} but the BEGAN checkpoint holds {}",
                    self.meta.encoder_sha256,
                    began.encoder_hash()
                ),
            ));
        }
        Ok(())
    }
}
