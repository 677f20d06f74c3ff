//! The pipeline stages behind each subcommand.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use affectgan_core::affect::{
    broadcast_labels, train_head as fit_head_core, AffectHead, ChunkIndex, EmotionPrediction, HeadArch, HeadConfig,
    HeadTraining,
};
use affectgan_core::began::{train_began as train_began_core, BeganArch, Encoder};
use affectgan_core::dsp::{chunk_1s, resample_to_16k, AudioClip, NormalizationStats, SpectrogramTile, Stft};
use affectgan_core::eval::{aggregate, aggregate_median, ccc, evaluate_runs, Aggregator, EvalReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{BeganCheckpoint, HeadCheckpoint};
use crate::config::RunConfig;
use crate::error::{Error, IoContext, Result};
use crate::manifest::{parse_manifest, resolve_audio, split_by_order, ManifestEntry};
use crate::report::write_report;
use crate::store::{ChunkStore, StoreIndex, StoreWriter};
use crate::wav::read_wav;

pub const TRAIN_LOG: &str = "train_log.csv";
pub const PAIRS_CSV: &str = "pairs.csv";
pub const HEAD_LOGS: &str = "head_logs.csv";
const WRITE_BATCH: usize = 32;

/// Decodes a WAV file and brings it to 16 kHz mono.
pub fn load_clip(path: &Path, utterance_id: &str) -> Result<AudioClip> {
    Ok(resample_to_16k(&read_wav(path, utterance_id)?)?)
}

/// Normalised tiles of every full second of `clip`.
pub fn clip_tiles(clip: &AudioClip, stats: &NormalizationStats) -> Result<Vec<SpectrogramTile>> {
    let stft = Stft::new();
    chunk_1s(clip)?
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(stats.tile(&stft.log_magnitude(c)?, clip.utterance_id.clone(), i)))
        .collect()
}

/// Chunk count and log-magnitude range of one clip.
type ChunkScan = (usize, Option<(f64, f64)>);

fn log_range(clip: &AudioClip) -> Result<ChunkScan> {
    let stft = Stft::new();
    let chunks = chunk_1s(clip)?;
    let mut range: Option<(f64, f64)> = None;
    for c in &chunks {
        let (lo, hi) = stft.log_magnitude(c)?.min_max();
        range = Some(range.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
    }
    Ok((chunks.len(), range))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessSummary {
    /// `(utterance_id, chunk count)` for every decoded file, in manifest order.
    pub files: Vec<(String, usize)>,
    /// `(utterance_id, reason)` for files that could not be decoded.
    pub skipped: Vec<(String, String)>,
    pub index: StoreIndex,
}

/// Decodes, chunks and normalises every manifest entry into a chunk store.
/// Normalisation bounds span all chunks of the readable files.
pub fn preprocess(manifest_path: &Path, store_dir: &Path, config: &RunConfig) -> Result<PreprocessSummary> {
    config.validate()?;
    let entries = parse_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "{}: manifest has no entries",
            manifest_path.display()
        )));
    }
    let scans: Vec<Result<ChunkScan>> = entries
        .par_iter()
        .map(|e| log_range(&load_clip(&resolve_audio(manifest_path, e), &e.utterance_id)?))
        .collect();

    let mut files = Vec::new();
    let mut skipped = Vec::new();
    let mut readable: Vec<&ManifestEntry> = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (e, scan) in entries.iter().zip(scans) {
        match scan {
            Ok((n, range)) => {
                log::info!("{}: {n} chunks", e.utterance_id);
                files.push((e.utterance_id.clone(), n));
                if let Some((a, b)) = range {
                    lo = lo.min(a);
                    hi = hi.max(b);
                    readable.push(e);
                }
            }
            Err(err) => {
                log::error!("skipping {}: {err}", e.utterance_id);
                skipped.push((e.utterance_id.clone(), err.to_string()));
            }
        }
    }
    if readable.is_empty() {
        return Err(Error::Store {
            path: store_dir.to_path_buf(),
            message: "no full chunks in any file".into(),
        });
    }
    let stats = NormalizationStats::from_range(lo, hi)?;

    let mut writer = StoreWriter::create(store_dir)?;
    for batch in readable.chunks(WRITE_BATCH) {
        let tiles: Vec<Vec<SpectrogramTile>> = batch
            .par_iter()
            .map(|e| clip_tiles(&load_clip(&resolve_audio(manifest_path, e), &e.utterance_id)?, &stats))
            .collect::<Result<_>>()?;
        for t in tiles.iter().flatten() {
            writer.push(t)?;
        }
    }
    let index = writer.finish(stats, config.echo())?;
    Ok(PreprocessSummary { files, skipped, index })
}

fn tile_refs(tiles: &[SpectrogramTile]) -> Vec<&[f32]> {
    tiles.iter().map(|t| t.values.as_slice()).collect()
}

/// Trains a BEGAN on every tile of the store and saves the checkpoint with
/// its per-epoch log.
pub fn train_began(store_dir: &Path, out_dir: &Path, config: &RunConfig) -> Result<BeganCheckpoint> {
    config.validate()?;
    let store = ChunkStore::open(store_dir)?;
    let tiles = store.load_all()?;
    std::fs::create_dir_all(out_dir).at(out_dir)?;
    let log_path = out_dir.join(TRAIN_LOG);
    let mut log_file = std::fs::File::create(&log_path).at(&log_path)?;
    writeln!(log_file, "epoch,l_real,l_gen,k,m_global").at(&log_path)?;
    let mut io_error = None;
    let cfg = config.began_config();
    let run = train_began_core(&tile_refs(&tiles), BeganArch::default(), &cfg, |s| {
        log::info!(
            "epoch {} l_real {:.5} l_gen {:.5} k {:.6} m {:.5}",
            s.epoch,
            s.l_real,
            s.l_gen,
            s.k,
            s.m_global
        );
        let row = writeln!(log_file, "{},{},{},{},{}", s.epoch, s.l_real, s.l_gen, s.k, s.m_global);
        if let Err(e) = row {
            io_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(Error::Io {
            path: log_path,
            source: e,
        });
    }
    let ckpt = BeganCheckpoint::new(run.model, run.state, store.stats(), &cfg, config.echo());
    ckpt.save(out_dir)?;
    Ok(ckpt)
}

/// Encoder feature maps, computed in parallel.
pub fn feature_maps(encoder: &Encoder<f32>, tiles: &[SpectrogramTile]) -> Result<Vec<Vec<f32>>> {
    Ok(tiles
        .par_iter()
        .map(|t| encoder.feature_map(&t.values))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Tiles and feature maps of the labeled utterances in `entries`, with one
/// label per tile. Every labeled utterance needs at least one chunk.
pub struct LabeledFeatures {
    pub tiles: Vec<SpectrogramTile>,
    pub features: Vec<Vec<f32>>,
    pub targets: Vec<[f32; 2]>,
}

pub fn labeled_features(
    store: &ChunkStore,
    entries: &[ManifestEntry],
    encoder: &Encoder<f32>,
) -> Result<LabeledFeatures> {
    let labels: BTreeMap<String, (f64, f64)> = entries
        .iter()
        .filter_map(|e| e.labels.map(|l| (e.utterance_id.clone(), l)))
        .collect();
    if labels.is_empty() {
        return Err(Error::Config("no labeled utterances".into()));
    }
    let by_utt = store.by_utterance();
    let mut tiles = Vec::new();
    for id in entries
        .iter()
        .filter(|e| e.is_labeled())
        .map(|e| e.utterance_id.as_str())
    {
        let positions = by_utt.get(id).ok_or_else(|| Error::Store {
            path: store.dir.clone(),
            message: format!("labeled utterance {id:?} has no chunks"),
        })?;
        for &p in positions {
            tiles.push(store.load(&store.index.records[p])?);
        }
    }
    let pairs = broadcast_labels(tiles.iter().map(|t| (t.utterance_id.as_str(), t.chunk_index)), &labels)?;
    let targets = pairs.iter().map(|p| [p.arousal as f32, p.valence as f32]).collect();
    let features = feature_maps(encoder, &tiles)?;
    Ok(LabeledFeatures {
        tiles,
        features,
        targets,
    })
}

fn fit_head(
    data: &LabeledFeatures,
    feature_shape: affectgan_core::nn::Shape,
    cfg: &HeadConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<HeadTraining> {
    let refs: Vec<&[f32]> = data.features.iter().map(|f| f.as_slice()).collect();
    Ok(fit_head_core(
        &refs,
        &data.targets,
        HeadArch::for_features(feature_shape),
        cfg,
        on_epoch,
    )?)
}

/// Fits the regression head on the labeled utterances of `manifest` with the
/// encoder frozen.
pub fn train_head(
    store_dir: &Path,
    manifest_path: &Path,
    began_dir: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<HeadCheckpoint> {
    config.validate()?;
    let began = BeganCheckpoint::load(began_dir)?;
    let store = ChunkStore::open(store_dir)?;
    warn_on_stats_mismatch(&store, &began);
    let entries = parse_manifest(manifest_path)?;
    let data = labeled_features(&store, &entries, began.model.encoder())?;
    std::fs::create_dir_all(out_dir).at(out_dir)?;

    let pairs_path = out_dir.join(PAIRS_CSV);
    let mut pairs = String::from("utterance_id,chunk_index,arousal,valence\n");
    for (t, [a, v]) in data.tiles.iter().zip(&data.targets) {
        pairs.push_str(&format!("{},{},{a},{v}\n", t.utterance_id, t.chunk_index));
    }
    std::fs::write(&pairs_path, pairs).at(&pairs_path)?;

    let cfg = config.head_config(config.seed);
    let mut log = String::from("epoch,mse\n");
    let fit = fit_head(&data, began.model.arch.feature_shape(), &cfg, |epoch, mse| {
        log::info!("head epoch {epoch} mse {mse:.6}");
        log.push_str(&format!("{epoch},{mse}\n"));
    })?;
    let log_path = out_dir.join(TRAIN_LOG);
    std::fs::write(&log_path, log).at(&log_path)?;
    let final_mse = fit.epoch_mse.last().copied().unwrap_or(f64::NAN);
    let reference = relative_to(out_dir, began_dir);
    let ckpt = HeadCheckpoint::new(fit.head, &cfg, &began, &reference, final_mse, config.echo());
    ckpt.save(out_dir)?;
    Ok(ckpt)
}

/// `target` as seen from `base` when both are absolute; otherwise `target`.
fn relative_to(base: &Path, target: &Path) -> PathBuf {
    use std::path::Component;
    if !base.is_absolute() || !target.is_absolute() {
        return target.to_path_buf();
    }
    fn normal(p: &Path) -> Vec<Component<'_>> {
        let mut out = Vec::new();
        for c in p.components() {
            match c {
                Component::CurDir => {}
                Component::ParentDir if matches!(out.last(), Some(Component::Normal(_))) => {
                    out.pop();
                }
                c => out.push(c),
            }
        }
        out
    }
    let (b, t) = (normal(base), normal(target));
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    if rel.as_os_str().is_empty() {
        rel.push(".");
    }
    rel
}

fn warn_on_stats_mismatch(store: &ChunkStore, began: &BeganCheckpoint) {
    if store.stats() != began.stats {
        log::warn!("store normalisation bounds differ from those the BEGAN was trained with");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkOutput {
    pub chunk_index: usize,
    pub arousal: f64,
    pub valence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictOutput {
    pub utterance_id: String,
    /// Median over chunks.
    pub arousal: f64,
    pub valence: f64,
    pub chunks: Vec<ChunkOutput>,
}

fn predict_tiles(
    encoder: &Encoder<f32>,
    head: &AffectHead<f32>,
    tiles: &[SpectrogramTile],
) -> Result<Vec<EmotionPrediction>> {
    tiles
        .par_iter()
        .map(|t| Ok(affectgan_core::affect::predict_chunk(encoder, head, t)?))
        .collect()
}

/// Per-chunk and median-aggregated prediction for one WAV file.
pub fn predict(wav: &Path, began_dir: &Path, head_dir: &Path) -> Result<PredictOutput> {
    let began = BeganCheckpoint::load(began_dir)?;
    let head = HeadCheckpoint::load(head_dir)?;
    head.check_encoder(&began, head_dir)?;
    let id = wav
        .file_stem()
        .map_or_else(|| "utterance".into(), |s| s.to_string_lossy().into_owned());
    let clip = load_clip(wav, &id)?;
    let tiles = clip_tiles(&clip, &began.stats)?;
    if tiles.is_empty() {
        return Err(Error::NoChunks(wav.to_path_buf()));
    }
    let chunks = predict_tiles(began.model.encoder(), &head.head, &tiles)?;
    let agg = aggregate_median(&chunks)?;
    Ok(PredictOutput {
        utterance_id: id,
        arousal: agg.arousal,
        valence: agg.valence,
        chunks: chunks
            .iter()
            .map(|c| ChunkOutput {
                chunk_index: match c.chunk {
                    ChunkIndex::Chunk(i) => i,
                    ChunkIndex::Aggregate => unreachable!("per-chunk prediction"),
                },
                arousal: c.arousal,
                valence: c.valence,
            })
            .collect(),
    })
}

/// How the labeled utterances are divided for evaluation.
#[derive(Clone, Debug)]
pub enum Split {
    /// The last fraction of labeled manifest rows is held out.
    Fraction(f64),
    /// Explicit held-out manifest; the main manifest is the training set.
    Manifest(PathBuf),
}

/// Per-utterance aggregated predictions scored against the labels.
fn score(head: &AffectHead<f32>, test: &LabeledFeatures, how: Aggregator) -> Result<(f64, f64)> {
    let mut by_utt: BTreeMap<&str, (Vec<EmotionPrediction>, [f32; 2])> = BTreeMap::new();
    for ((t, f), target) in test.tiles.iter().zip(&test.features).zip(&test.targets) {
        let [a, v] = head.predict(f)?;
        let p = EmotionPrediction {
            arousal: a as f64,
            valence: v as f64,
            utterance_id: t.utterance_id.clone(),
            chunk: ChunkIndex::Chunk(t.chunk_index),
        };
        by_utt
            .entry(&t.utterance_id)
            .or_insert_with(|| (Vec::new(), *target))
            .0
            .push(p);
    }
    let (mut pa, mut pv, mut ta, mut tv) = (vec![], vec![], vec![], vec![]);
    for (chunks, [a, v]) in by_utt.values() {
        let agg = aggregate(chunks, how)?;
        pa.push(agg.arousal);
        pv.push(agg.valence);
        ta.push(*a as f64);
        tv.push(*v as f64);
    }
    Ok((ccc(&pa, &ta)?, ccc(&pv, &tv)?))
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub split: Split,
    pub runs: usize,
    pub svg: bool,
    pub aggregator: Aggregator,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: Split::Fraction(0.2),
            runs: 10,
            svg: true,
            aggregator: Aggregator::Median,
        }
    }
}

/// Retrains the head `runs` times with seeds `config.seed + i` and scores
/// each run on the held-out utterances. Writes the report files into
/// `out_dir`.
pub fn evaluate(
    store_dir: &Path,
    manifest_path: &Path,
    began_dir: &Path,
    out_dir: &Path,
    options: &EvalOptions,
    config: &RunConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let EvalOptions {
        split,
        runs,
        svg,
        aggregator,
    } = options;
    let (runs, svg) = (*runs, *svg);
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let began = BeganCheckpoint::load(began_dir)?;
    let store = ChunkStore::open(store_dir)?;
    warn_on_stats_mismatch(&store, &began);
    let entries = parse_manifest(manifest_path)?;
    let (train, test) = match split {
        Split::Fraction(f) => split_by_order(&entries, *f)?,
        Split::Manifest(p) => (entries, parse_manifest(p)?),
    };
    let encoder = began.model.encoder();
    let train = labeled_features(&store, &train, encoder)?;
    let test = labeled_features(&store, &test, encoder)?;
    log::info!(
        "{} training chunks, {} held-out chunks",
        train.tiles.len(),
        test.tiles.len()
    );

    std::fs::create_dir_all(out_dir).at(out_dir)?;
    let mut head_logs = String::from("run,epoch,mse\n");
    let shape = began.model.arch.feature_shape();
    let report = evaluate_runs(runs, config.seed, |i, seed| -> Result<(f64, f64)> {
        let fit = fit_head(&train, shape, &config.head_config(seed), |epoch, mse| {
            head_logs.push_str(&format!("{i},{epoch},{mse}\n"));
        })?;
        let (a, v) = score(&fit.head, &test, *aggregator)?;
        log::info!("run {i} seed {seed}: ccc arousal {a:.4} valence {v:.4}");
        Ok((a, v))
    })?;
    let path = out_dir.join(HEAD_LOGS);
    std::fs::write(&path, head_logs).at(&path)?;
    write_report(out_dir, &report, config.echo(), svg)?;
    Ok(report)
}
