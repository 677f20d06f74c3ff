use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use affectgan::config::RunConfig;
use affectgan::manifest::{parse_manifest, parse_manifest_from, write_manifest_to, ManifestEntry};
use affectgan::pipeline::preprocess;
use affectgan::store::ChunkStore;
use affectgan::synth::{generate_synthetic_corpus, valence_for_carrier};
use proptest::prelude::*;

fn read_pcm(path: &Path) -> (hound::WavSpec, Vec<f64>) {
    let mut r = hound::WavReader::open(path).unwrap();
    let spec = r.spec();
    let s = r
        .samples::<i16>()
        .map(|v| v.unwrap() as f64 / i16::MAX as f64)
        .collect();
    (spec, s)
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        out.insert(
            entry.strip_prefix(dir).unwrap().to_path_buf(),
            fs::read(&entry).unwrap(),
        );
    }
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

/// Carrier estimate from zero crossings; the envelope never reaches zero.
fn carrier_hz(samples: &[f64], rate: f64) -> f64 {
    let crossings = samples.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    crossings as f64 * rate / (2.0 * samples.len() as f64)
}

#[test]
fn synthetic_corpus_is_byte_identical_per_seed() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    generate_synthetic_corpus(12, 7, a.path()).unwrap();
    generate_synthetic_corpus(12, 7, b.path()).unwrap();
    generate_synthetic_corpus(12, 8, c.path()).unwrap();
    let (ba, bb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(ba.len(), 13);
    assert_eq!(ba, bb);
    assert_ne!(ba, dir_bytes(c.path()));
}

#[test]
fn synthetic_labels_follow_rms_and_carrier() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_corpus(24, 3, dir.path()).unwrap();
    let entries = parse_manifest(&manifest).unwrap();
    let mut rows = Vec::new();
    for e in &entries {
        let (spec, s) = read_pcm(&dir.path().join(&e.audio_path));
        assert_eq!((spec.sample_rate, spec.channels, spec.bits_per_sample), (16000, 1, 16));
        let dur = s.len() as f64 / 16000.0;
        assert!((2.0..=4.0).contains(&dur), "{dur}");
        let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let (a, v) = e.labels.unwrap();
        assert!((-1.0..=1.0).contains(&a) && (-1.0..=1.0).contains(&v));
        // 0.02 in valence is 6 Hz of carrier
        assert!(
            (v - valence_for_carrier(carrier_hz(&s, 16000.0))).abs() < 0.02,
            "{} {v}",
            e.utterance_id
        );
        rows.push((rms, a));
    }
    let max_rms = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    for &(rms, a) in &rows {
        assert!((a - (2.0 * rms / max_rms - 1.0)).abs() < 1e-9);
    }
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
    assert_eq!(rows.last().unwrap().1, 1.0);
}

#[test]
fn preprocess_stores_one_tile_per_full_second() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_corpus(10, 11, &dir.path().join("corpus")).unwrap();
    let config = RunConfig::default();
    let summary = preprocess(&manifest, &dir.path().join("store"), &config).unwrap();
    assert!(summary.skipped.is_empty());

    let mut expected = BTreeMap::new();
    for e in parse_manifest(&manifest).unwrap() {
        let r = hound::WavReader::open(dir.path().join("corpus").join(&e.audio_path)).unwrap();
        expected.insert(e.utterance_id, r.duration() as usize / 16000);
    }
    let store = ChunkStore::open(&dir.path().join("store")).unwrap();
    assert_eq!(store.len(), expected.values().sum::<usize>());
    assert_eq!(store.index.shape, [512, 32]);
    for (utt, idx) in store.by_utterance() {
        assert_eq!(idx.len(), expected[utt]);
        let chunks: Vec<usize> = idx.iter().map(|&i| store.index.records[i].chunk_index).collect();
        assert_eq!(chunks, (0..idx.len()).collect::<Vec<_>>());
    }
    for t in store.load_all().unwrap() {
        assert_eq!(t.values.len(), 512 * 32);
        assert!(t.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
    assert_eq!(store.index.config, config.echo());
}

#[test]
fn preprocess_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_corpus(4, 5, &dir.path().join("corpus")).unwrap();
    let config = RunConfig::default();
    preprocess(&manifest, &dir.path().join("s1"), &config).unwrap();
    preprocess(&manifest, &dir.path().join("s2"), &config).unwrap();
    assert_eq!(dir_bytes(&dir.path().join("s1")), dir_bytes(&dir.path().join("s2")));
}

#[test]
fn preprocess_skips_unreadable_files_and_rejects_empty_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let manifest = generate_synthetic_corpus(3, 5, &corpus).unwrap();
    fs::write(corpus.join("clip_0001.wav"), b"not audio").unwrap();
    let summary = preprocess(&manifest, &dir.path().join("store"), &RunConfig::default()).unwrap();
    assert_eq!(summary.skipped.len(), 1);
    assert_eq!(summary.skipped[0].0, "clip_0001");
    assert_eq!(summary.files.len(), 2);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "utterance_id,audio_path,arousal,valence\n").unwrap();
    assert!(preprocess(&empty, &dir.path().join("store2"), &RunConfig::default()).is_err());
}

fn entry() -> impl Strategy<Value = ManifestEntry> {
    let label = prop_oneof![Just(None), (-1.0f64..=1.0, -1.0f64..=1.0).prop_map(Some)];
    ("[a-z0-9_]{1,6}", "[a-z0-9_/]{1,12}\\.wav", label).prop_map(|(id, path, labels)| ManifestEntry {
        utterance_id: id,
        audio_path: path.into(),
        labels,
    })
}

proptest! {
    #[test]
    fn manifest_round_trip(entries in prop::collection::vec(entry(), 0..20)) {
        let mut seen = std::collections::BTreeSet::new();
        let entries: Vec<ManifestEntry> =
            entries.into_iter().filter(|e| seen.insert(e.utterance_id.clone())).collect();
        let mut buf = Vec::new();
        write_manifest_to(&mut buf, &entries).unwrap();
        let back = parse_manifest_from(buf.as_slice(), Path::new("m.csv")).unwrap();
        prop_assert_eq!(back, entries);
    }
}
