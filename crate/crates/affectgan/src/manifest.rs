//! `utterance_id,audio_path,arousal,valence` manifests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};

pub const HEADER: [&str; 4] = ["utterance_id", "audio_path", "arousal", "valence"];

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// As written in the manifest; see [`resolve_audio`].
    pub audio_path: PathBuf,
    /// `(arousal, valence)` when labeled.
    pub labels: Option<(f64, f64)>,
}

impl ManifestEntry {
    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }
}

/// Relative audio paths are taken relative to the manifest's directory.
pub fn resolve_audio(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    if entry.audio_path.is_absolute() {
        entry.audio_path.clone()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(&entry.audio_path)
    }
}

fn parse_label(cell: &str) -> std::result::Result<f64, String> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| format!("label {cell:?} is not a number"))?;
    if !(-1.0..=1.0).contains(&v) {
        return Err(format!("label {v} outside [-1, 1]"));
    }
    Ok(v)
}

pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path).at(path)?;
    parse_manifest_from(file, path)
}

/// Parses manifest CSV from any reader; `path` is used in error messages.
pub fn parse_manifest_from(reader: impl std::io::Read, path: &Path) -> Result<Vec<ManifestEntry>> {
    let err = |line: u64, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| err(1, e.to_string()))?,
        None => return Err(err(1, "missing header".into())),
    };
    if header.iter().ne(HEADER) {
        return Err(err(1, format!("header must be `{}`", HEADER.join(","))));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(err(line, format!("expected 4 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(err(line, "empty utterance_id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(err(line, format!("duplicate utterance_id {id:?}")));
        }
        let labels = match (rec[2].trim().is_empty(), rec[3].trim().is_empty()) {
            (true, true) => None,
            (false, false) => {
                let a = parse_label(&rec[2]).map_err(|m| err(line, m))?;
                let v = parse_label(&rec[3]).map_err(|m| err(line, m))?;
                Some((a, v))
            }
            _ => {
                return Err(err(
                    line,
                    "arousal and valence must both be present or both empty".into(),
                ))
            }
        };
        entries.push(ManifestEntry {
            utterance_id: id,
            audio_path: PathBuf::from(&rec[1]),
            labels,
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest_to(&mut buf, entries)?;
    std::fs::write(path, buf).at(path)
}

pub fn write_manifest_to(out: impl std::io::Write, entries: &[ManifestEntry]) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: PathBuf::from("<manifest>"),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(io)?;
    for e in entries {
        let (a, v) = match e.labels {
            Some((a, v)) => (a.to_string(), v.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([e.utterance_id.as_str(), &e.audio_path.to_string_lossy(), &a, &v])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: PathBuf::from("<manifest>"),
        source: e,
    })
}

/// Splits labeled entries by manifest order: the last `test_fraction`
/// (rounded, at least one of each side) form the test set.
pub fn split_by_order(
    entries: &[ManifestEntry],
    test_fraction: f64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let labeled: Vec<ManifestEntry> = entries.iter().filter(|e| e.is_labeled()).cloned().collect();
    if labeled.len() < 2 {
        return Err(Error::Config("need at least two labeled utterances to split".into()));
    }
    let n_test = ((labeled.len() as f64 * test_fraction).round() as usize).clamp(1, labeled.len() - 1);
    let mut train = labeled;
    let test = train.split_off(train.len() - n_test);
    Ok((train, test))
}
