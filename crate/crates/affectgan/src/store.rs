//! On-disk chunk store: one little-endian `.f32` payload per tile plus
//! `index.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use affectgan_core::dsp::{NormalizationStats, SpectrogramTile, FRAMES, FREQ_BINS, SAMPLE_RATE, TILE_LEN};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const INDEX_FILE: &str = "index.json";
const TILE_DIR: &str = "tiles";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub log_floor: f64,
    pub log_ceil: f64,
}

impl From<NormalizationStats> for StatsRecord {
    fn from(s: NormalizationStats) -> Self {
        Self {
            log_floor: s.log_floor,
            log_ceil: s.log_ceil,
        }
    }
}

impl StatsRecord {
    pub fn to_stats(self) -> Result<NormalizationStats> {
        Ok(NormalizationStats::new(self.log_floor, self.log_ceil)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub utterance_id: String,
    pub chunk_index: usize,
    /// Payload path relative to the store directory.
    pub tile: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreIndex {
    /// `[bins, frames]`
    pub shape: [usize; 2],
    pub sample_rate: u32,
    pub stats: StatsRecord,
    pub records: Vec<ChunkRecord>,
    #[serde(default)]
    pub config: serde_json::Value,
}

fn store_err(dir: &Path, message: impl Into<String>) -> Error {
    Error::Store {
        path: dir.to_path_buf(),
        message: message.into(),
    }
}

fn encode_tile(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn decode_tile(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

/// Streams tiles to disk; [`StoreWriter::finish`] writes the index.
pub struct StoreWriter {
    dir: PathBuf,
    records: Vec<ChunkRecord>,
}

impl StoreWriter {
    /// Prepares `dir`, deleting payloads left by an earlier store.
    pub fn create(dir: &Path) -> Result<Self> {
        let tile_dir = dir.join(TILE_DIR);
        std::fs::create_dir_all(&tile_dir).at(&tile_dir)?;
        for entry in std::fs::read_dir(&tile_dir).at(&tile_dir)? {
            let path = entry.at(&tile_dir)?.path();
            if path.extension().is_some_and(|e| e == "f32") {
                std::fs::remove_file(&path).at(&path)?;
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn push(&mut self, tile: &SpectrogramTile) -> Result<()> {
        if tile.values.len() != TILE_LEN {
            return Err(store_err(
                &self.dir,
                format!(
                    "tile {}#{} has {} values, expected {TILE_LEN}",
                    tile.utterance_id,
                    tile.chunk_index,
                    tile.values.len()
                ),
            ));
        }
        let rel = format!("{TILE_DIR}/{:06}.f32", self.records.len());
        let path = self.dir.join(&rel);
        std::fs::write(&path, encode_tile(&tile.values)).at(&path)?;
        self.records.push(ChunkRecord {
            utterance_id: tile.utterance_id.clone(),
            chunk_index: tile.chunk_index,
            tile: rel,
        });
        Ok(())
    }

    pub fn finish(self, stats: NormalizationStats, config: serde_json::Value) -> Result<StoreIndex> {
        validate_records(&self.dir, &self.records)?;
        let index = StoreIndex {
            shape: [FREQ_BINS, FRAMES],
            sample_rate: SAMPLE_RATE,
            stats: stats.into(),
            records: self.records,
            config,
        };
        let path = self.dir.join(INDEX_FILE);
        let json = serde_json::to_vec_pretty(&index).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, json).at(&path)?;
        Ok(index)
    }
}

/// Writes `tiles` in the given order, replacing any previous payloads in `dir`.
pub fn write_chunk_store(
    dir: &Path,
    tiles: &[SpectrogramTile],
    stats: NormalizationStats,
    config: serde_json::Value,
) -> Result<StoreIndex> {
    let mut w = StoreWriter::create(dir)?;
    for t in tiles {
        w.push(t)?;
    }
    w.finish(stats, config)
}

/// Chunk indices must be contiguous from zero for every utterance.
fn validate_records(dir: &Path, records: &[ChunkRecord]) -> Result<()> {
    let mut by_utt: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in records {
        by_utt.entry(&r.utterance_id).or_default().push(r.chunk_index);
    }
    for (id, mut idx) in by_utt {
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(store_err(
                dir,
                format!("chunk indices of {id:?} are not contiguous from 0"),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ChunkStore {
    pub dir: PathBuf,
    pub index: StoreIndex,
}

impl ChunkStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let bytes = std::fs::read(&path).at(&path)?;
        let index: StoreIndex = serde_json::from_slice(&bytes).map_err(|source| Error::Json { path, source })?;
        if index.shape != [FREQ_BINS, FRAMES] {
            return Err(store_err(
                dir,
                format!("shape {:?}, expected [{FREQ_BINS}, {FRAMES}]", index.shape),
            ));
        }
        if index.sample_rate != SAMPLE_RATE {
            return Err(store_err(
                dir,
                format!("sample rate {}, expected {SAMPLE_RATE}", index.sample_rate),
            ));
        }
        index.stats.to_stats()?;
        validate_records(dir, &index.records)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            index,
        })
    }

    pub fn stats(&self) -> NormalizationStats {
        self.index.stats.to_stats().expect("validated on open")
    }

    pub fn len(&self) -> usize {
        self.index.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.records.is_empty()
    }

    pub fn load(&self, record: &ChunkRecord) -> Result<SpectrogramTile> {
        let path = self.dir.join(&record.tile);
        let bytes = std::fs::read(&path).at(&path)?;
        if bytes.len() != TILE_LEN * 4 {
            return Err(store_err(
                &self.dir,
                format!("{} holds {} bytes, expected {}", record.tile, bytes.len(), TILE_LEN * 4),
            ));
        }
        Ok(SpectrogramTile::from_values(
            decode_tile(&bytes),
            record.utterance_id.clone(),
            record.chunk_index,
        )?)
    }

    pub fn load_all(&self) -> Result<Vec<SpectrogramTile>> {
        self.index.records.iter().map(|r| self.load(r)).collect()
    }

    /// Record positions grouped by utterance, each in chunk order.
    pub fn by_utterance(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.index.records.iter().enumerate() {
            map.entry(&r.utterance_id).or_default().push(i);
        }
        for positions in map.values_mut() {
            positions.sort_by_key(|&i| self.index.records[i].chunk_index);
        }
        map
    }
}
