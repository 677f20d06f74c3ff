//! Seeded corpus of amplitude-modulated tones with known labels.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use affectgan_core::dsp::SAMPLE_RATE;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, IoContext, Result};
use crate::manifest::{write_manifest, ManifestEntry};
use crate::wav::{quantize_pcm16, write_wav_pcm16};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MIN_CARRIER_HZ: f64 = 200.0;
pub const MAX_CARRIER_HZ: f64 = 800.0;

pub fn valence_for_carrier(f: f64) -> f64 {
    2.0 * (f - MIN_CARRIER_HZ) / (MAX_CARRIER_HZ - MIN_CARRIER_HZ) - 1.0
}

pub fn arousal_for_rms(rms: f64, max_rms: f64) -> f64 {
    2.0 * rms / max_rms - 1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthClip {
    pub utterance_id: String,
    pub samples: Vec<f32>,
    pub carrier_hz: f64,
}

fn render(rng: &mut ChaCha8Rng, utterance_id: String) -> SynthClip {
    let duration = rng.gen_range(2.0..=4.0);
    let carrier_hz = rng.gen_range(MIN_CARRIER_HZ..=MAX_CARRIER_HZ);
    let amplitude = rng.gen_range(0.05..0.9);
    let mod_hz = rng.gen_range(1.0..8.0);
    let depth = rng.gen_range(0.1..0.9);
    let (phase_c, phase_m) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
    let n = (duration * SAMPLE_RATE as f64).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let envelope = 1.0 - depth * 0.5 * (1.0 + (TAU * mod_hz * t + phase_m).sin());
            (amplitude * envelope * (TAU * carrier_hz * t + phase_c).sin()) as f32
        })
        .collect();
    SynthClip {
        utterance_id,
        samples,
        carrier_hz,
    }
}

/// RMS of the 16-bit samples as they are written to disk.
fn quantized_rms(samples: &[f32]) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|&s| (quantize_pcm16(s) as f64 / i16::MAX as f64).powi(2))
        .sum();
    (sum / samples.len() as f64).sqrt()
}

/// Writes `n` 16 kHz mono clips and `manifest.csv` into `dir`; returns the
/// manifest path.
pub fn generate_synthetic_corpus(n: usize, seed: u64, dir: &Path) -> Result<PathBuf> {
    if n == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    std::fs::create_dir_all(dir).at(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clips: Vec<SynthClip> = (0..n).map(|i| render(&mut rng, format!("clip_{i:04}"))).collect();
    let rms: Vec<f64> = clips.iter().map(|c| quantized_rms(&c.samples)).collect();
    let max_rms = rms.iter().cloned().fold(0.0, f64::max);
    let mut entries = Vec::with_capacity(n);
    for (clip, &r) in clips.iter().zip(&rms) {
        let file = format!("{}.wav", clip.utterance_id);
        write_wav_pcm16(&dir.join(&file), &clip.samples, SAMPLE_RATE)?;
        entries.push(ManifestEntry {
            utterance_id: clip.utterance_id.clone(),
            audio_path: file.into(),
            labels: Some((arousal_for_rms(r, max_rms), valence_for_carrier(clip.carrier_hz))),
        });
    }
    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valence_endpoints() {
        assert_eq!(valence_for_carrier(800.0), 1.0);
        assert_eq!(valence_for_carrier(500.0), 0.0);
        assert_eq!(valence_for_carrier(200.0), -1.0);
    }

    #[test]
    fn clips_respect_their_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..50 {
            let c = render(&mut rng, format!("c{i}"));
            assert!((32_000..=64_000).contains(&c.samples.len()));
            assert!((MIN_CARRIER_HZ..=MAX_CARRIER_HZ).contains(&c.carrier_hz));
            assert!(c.samples.iter().all(|s| s.abs() < 1.0));
        }
    }

    #[test]
    fn zero_clips_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic_corpus(0, 1, dir.path()).is_err());
    }
}
