use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use affectgan::checkpoint::{BeganCheckpoint, HeadCheckpoint};
use affectgan::config::RunConfig;
use affectgan::manifest::parse_manifest;
use affectgan::pipeline::{preprocess, train_head, PAIRS_CSV, TRAIN_LOG};
use affectgan::store::ChunkStore;
use affectgan::synth::generate_synthetic_corpus;
use affectgan_core::affect::predict_chunk;
use affectgan_core::began::{BeganArch, BeganConfig, BeganModel, EquilibriumState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
}

impl Fixture {
    /// Ten labeled clips, their store and an untrained full-size BEGAN.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let manifest = generate_synthetic_corpus(10, 21, &root.join("corpus")).unwrap();
        preprocess(&manifest, &root.join("store"), &RunConfig::default()).unwrap();
        let store = ChunkStore::open(&root.join("store")).unwrap();
        let model = BeganModel::new(BeganArch::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let state = EquilibriumState::new(0.7, 0.001).unwrap();
        BeganCheckpoint::new(
            model,
            state,
            store.stats(),
            &BeganConfig::default(),
            serde_json::Value::Null,
        )
        .save(&root.join("began"))
        .unwrap();
        Self {
            _dir: dir,
            root,
            manifest,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn train(&self, out: &str, config: &RunConfig) -> HeadCheckpoint {
        train_head(
            &self.path("store"),
            &self.manifest,
            &self.path("began"),
            &self.path(out),
            config,
        )
        .unwrap()
    }
}

fn head_config(epochs: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig {
        seed,
        ..Default::default()
    };
    c.head.epochs = epochs;
    c
}

fn last_mse(dir: &Path) -> f64 {
    let log = fs::read_to_string(dir.join(TRAIN_LOG)).unwrap();
    log.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn head_overfits_ten_utterances_with_the_encoder_frozen() {
    let fx = Fixture::new();
    let encoder_bytes = fs::read(fx.path("began/encoder.f32")).unwrap();
    let ckpt = fx.train("head", &head_config(120, 0));
    let mse = last_mse(&fx.path("head"));
    assert!(mse < 0.01, "final training mse {mse}");
    assert_eq!(ckpt.meta.final_mse, mse);
    assert_eq!(fs::read(fx.path("began/encoder.f32")).unwrap(), encoder_bytes);

    // predictions stay in range and survive a save/load round trip
    let began = BeganCheckpoint::load(&fx.path("began")).unwrap();
    let loaded = HeadCheckpoint::load(&fx.path("head")).unwrap();
    let store = ChunkStore::open(&fx.path("store")).unwrap();
    for tile in store.load_all().unwrap() {
        let p = predict_chunk(began.model.encoder(), &ckpt.head, &tile).unwrap();
        assert_eq!(p, predict_chunk(began.model.encoder(), &loaded.head, &tile).unwrap());
        assert!(p.arousal.abs() <= 1.0 && p.valence.abs() <= 1.0);
    }
}

#[test]
fn every_chunk_gets_its_utterance_label() {
    let fx = Fixture::new();
    fx.train("head", &head_config(1, 0));
    let labels: BTreeMap<String, (f64, f64)> = parse_manifest(&fx.manifest)
        .unwrap()
        .into_iter()
        .map(|e| (e.utterance_id, e.labels.unwrap()))
        .collect();
    let store = ChunkStore::open(&fx.path("store")).unwrap();
    let pairs = fs::read_to_string(fx.path("head").join(PAIRS_CSV)).unwrap();
    let mut rows = 0;
    for line in pairs.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (a, v): (f32, f32) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let (la, lv) = labels[f[0]];
        assert_eq!((a, v), (la as f32, lv as f32), "{line}");
        rows += 1;
    }
    assert_eq!(rows, store.len());
}

#[test]
fn head_training_is_deterministic_per_seed() {
    let fx = Fixture::new();
    fx.train("a", &head_config(3, 4));
    fx.train("b", &head_config(3, 4));
    fx.train("c", &head_config(3, 5));
    let log = |d: &str| fs::read_to_string(fx.path(d).join(TRAIN_LOG)).unwrap();
    assert_eq!(log("a"), log("b"));
    assert_ne!(log("a"), log("c"));
    assert_eq!(
        fs::read(fx.path("a/head.f32")).unwrap(),
        fs::read(fx.path("b/head.f32")).unwrap()
    );
}
