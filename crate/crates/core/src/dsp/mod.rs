//! Signal chain from decoded audio to normalised spectrogram tiles.
//!
//! Clips are resampled to 16 kHz, cut into non-overlapping one-second
//! chunks (a trailing partial second is dropped), and every chunk becomes a
//! 512×32 log-magnitude STFT tile scaled to [-1, 1] with corpus statistics.

mod fft;
mod resample;
mod spectrogram;

pub use fft::Fft;
pub use resample::{resample, resampled_len, MIN_SOURCE_RATE};
pub use spectrogram::{
    chunk_1s, compute_norm_stats, resample_to_16k, stft_tile, AudioClip, LogSpectrogram, NormalizationStats,
    SpectrogramTile, Stft, CHUNK_SAMPLES, FFT_SIZE, FRAMES, FREQ_BINS, HOP, PADDED_LEN, SAMPLE_RATE, TILE_LEN,
    TILE_SHAPE,
};
