use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use super::fft::Fft;
use super::resample::resample;
use crate::error::{Error, Result};
use crate::nn::Shape;

pub const SAMPLE_RATE: u32 = 16_000;
pub const CHUNK_SAMPLES: usize = 16_000;
pub const FFT_SIZE: usize = 1024;
pub const HOP: usize = 512;
pub const FRAMES: usize = 32;
/// Chunk length after tail padding: `(FRAMES - 1) · HOP + FFT_SIZE`.
pub const PADDED_LEN: usize = (FRAMES - 1) * HOP + FFT_SIZE;
/// One-sided bins without the Nyquist bin.
pub const FREQ_BINS: usize = FFT_SIZE / 2;
pub const TILE_LEN: usize = FREQ_BINS * FRAMES;
pub const TILE_SHAPE: Shape = Shape::new(1, FREQ_BINS, FRAMES);

const DEGENERATE_WIDEN: f64 = 1e-6;

/// Mono waveform with its rate and utterance identity.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub utterance_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, utterance_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("audio clip"));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::NonFinite("audio samples (must be finite and within [-1, 1])"));
        }
        Ok(Self {
            samples,
            sample_rate,
            utterance_id: utterance_id.into(),
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn resample_to_16k(clip: &AudioClip) -> Result<AudioClip> {
    if clip.sample_rate == SAMPLE_RATE {
        return Ok(clip.clone());
    }
    Ok(AudioClip {
        samples: resample(&clip.samples, clip.sample_rate, SAMPLE_RATE)?,
        sample_rate: SAMPLE_RATE,
        utterance_id: clip.utterance_id.clone(),
    })
}

/// Non-overlapping one-second chunks in temporal order. A trailing remainder
/// shorter than a second is dropped; a clip shorter than one second yields
/// no chunks.
pub fn chunk_1s(clip: &AudioClip) -> Result<Vec<&[f32]>> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRateMismatch {
            expected: SAMPLE_RATE,
            actual: clip.sample_rate,
        });
    }
    Ok(clip.samples.chunks_exact(CHUNK_SAMPLES).collect())
}

/// `log(1 + |X|)` over `FREQ_BINS × FRAMES`, bin-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSpectrogram {
    pub values: Vec<f64>,
}

impl LogSpectrogram {
    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * FRAMES + frame]
    }
}

/// Reusable STFT state: periodic Hann window and FFT plan.
#[derive(Clone, Debug)]
pub struct Stft {
    fft: Fft,
    window: Vec<f64>,
}

impl Default for Stft {
    fn default() -> Self {
        Self::new()
    }
}

impl Stft {
    pub fn new() -> Self {
        let window = (0..FFT_SIZE)
            .map(|n| 0.5 - 0.5 * Float::cos(2.0 * PI * n as f64 / FFT_SIZE as f64))
            .collect();
        Self {
            fft: Fft::new(FFT_SIZE),
            window,
        }
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Log-magnitude of a one-second chunk, zero-padded at the tail so that
    /// exactly `FRAMES` frames fit.
    pub fn log_magnitude(&self, chunk: &[f32]) -> Result<LogSpectrogram> {
        if chunk.len() != CHUNK_SAMPLES {
            return Err(Error::ChunkLength {
                expected: CHUNK_SAMPLES,
                actual: chunk.len(),
            });
        }
        let mut padded = vec![0.0f64; PADDED_LEN];
        for (p, &s) in padded.iter_mut().zip(chunk) {
            *p = s as f64;
        }
        let mut values = vec![0.0; TILE_LEN];
        let mut re = vec![0.0; FFT_SIZE];
        let mut im = vec![0.0; FFT_SIZE];
        for frame in 0..FRAMES {
            let start = frame * HOP;
            for (i, (r, w)) in re.iter_mut().zip(&self.window).enumerate() {
                *r = padded[start + i] * w;
            }
            im.fill(0.0);
            self.fft.forward(&mut re, &mut im);
            for bin in 0..FREQ_BINS {
                let mag = Float::hypot(re[bin], im[bin]);
                values[bin * FRAMES + frame] = Float::ln_1p(mag);
            }
        }
        Ok(LogSpectrogram { values })
    }
}

/// Corpus-level bounds of `log(1 + |X|)` used to scale tiles to [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationStats {
    pub log_floor: f64,
    pub log_ceil: f64,
}

impl NormalizationStats {
    pub fn new(log_floor: f64, log_ceil: f64) -> Result<Self> {
        if !log_floor.is_finite() || !log_ceil.is_finite() {
            return Err(Error::NonFinite("normalization stats"));
        }
        if log_floor >= log_ceil {
            return Err(Error::Config("log_floor must be below log_ceil".into()));
        }
        Ok(Self { log_floor, log_ceil })
    }

    /// Min/max over all spectrogram values; a degenerate range is widened by 1e-6.
    pub fn from_spectrograms<'a>(specs: impl IntoIterator<Item = &'a LogSpectrogram>) -> Result<Self> {
        let mut any = false;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for spec in specs {
            any = true;
            let (a, b) = spec.min_max();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if !any {
            return Err(Error::Empty("normalization sample"));
        }
        Self::from_range(lo, hi)
    }

    /// Observed value range; a degenerate range is widened by 1e-6.
    pub fn from_range(lo: f64, hi: f64) -> Result<Self> {
        if hi <= lo {
            return Self::new(lo, lo + DEGENERATE_WIDEN);
        }
        Self::new(lo, hi)
    }

    #[inline]
    pub fn normalize(&self, log_value: f64) -> f32 {
        let scaled = 2.0 * (log_value - self.log_floor) / (self.log_ceil - self.log_floor) - 1.0;
        scaled.clamp(-1.0, 1.0) as f32
    }

    pub fn tile(&self, spec: &LogSpectrogram, utterance_id: impl Into<String>, chunk_index: usize) -> SpectrogramTile {
        SpectrogramTile {
            values: spec.values.iter().map(|&v| self.normalize(v)).collect(),
            utterance_id: utterance_id.into(),
            chunk_index,
        }
    }
}

pub fn compute_norm_stats(chunks: &[&[f32]]) -> Result<NormalizationStats> {
    if chunks.is_empty() {
        return Err(Error::Empty("normalization sample"));
    }
    let stft = Stft::new();
    let specs = chunks
        .iter()
        .map(|c| stft.log_magnitude(c))
        .collect::<Result<Vec<_>>>()?;
    NormalizationStats::from_spectrograms(&specs)
}

/// Normalised `FREQ_BINS × FRAMES` spectrogram of one chunk, bin-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramTile {
    pub values: Vec<f32>,
    pub utterance_id: String,
    pub chunk_index: usize,
}

impl SpectrogramTile {
    pub fn from_values(values: Vec<f32>, utterance_id: impl Into<String>, chunk_index: usize) -> Result<Self> {
        if values.len() != TILE_LEN {
            return Err(Error::ShapeMismatch {
                expected: TILE_LEN,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::NonFinite("tile values (must lie in [-1, 1])"));
        }
        Ok(Self {
            values,
            utterance_id: utterance_id.into(),
            chunk_index,
        })
    }

    pub fn shape(&self) -> Shape {
        TILE_SHAPE
    }

    pub fn at(&self, bin: usize, frame: usize) -> f32 {
        self.values[bin * FRAMES + frame]
    }
}

pub fn stft_tile(
    chunk: &[f32],
    stats: &NormalizationStats,
    utterance_id: impl Into<String>,
    chunk_index: usize,
) -> Result<SpectrogramTile> {
    let spec = Stft::new().log_magnitude(chunk)?;
    Ok(stats.tile(&spec, utterance_id, chunk_index))
}
