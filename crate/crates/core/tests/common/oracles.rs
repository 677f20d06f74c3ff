//! Independent reference computations for the DSP and metric checks.
#![allow(dead_code)]

use std::f64::consts::PI;

use affectgan_core::dsp::{FFT_SIZE, HOP, PADDED_LEN};

pub fn tone(freq: f64, rate: u32, samples: usize, amp: f64) -> Vec<f32> {
    (0..samples)
        .map(|i| (amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32)
        .collect()
}

/// `ln(1 + |X[bin]|)` of one frame by a direct DFT over the zero-padded,
/// periodic-Hann-windowed chunk.
pub fn direct_log_magnitude(chunk: &[f32], bin: usize, frame: usize) -> f64 {
    let mut padded = chunk.to_vec();
    padded.resize(PADDED_LEN, 0.0);
    let (mut re, mut im) = (0.0, 0.0);
    for n in 0..FFT_SIZE {
        let w = 0.5 - 0.5 * (2.0 * PI * n as f64 / FFT_SIZE as f64).cos();
        let x = padded[frame * HOP + n] as f64 * w;
        let ang = -2.0 * PI * (bin * n) as f64 / FFT_SIZE as f64;
        re += x * ang.cos();
        im += x * ang.sin();
    }
    (1.0 + re.hypot(im)).ln()
}

pub fn rms(x: &[f32]) -> f64 {
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Frequency in `[lo, hi]` maximising the Hann-windowed DTFT magnitude,
/// scanned at `step` Hz.
pub fn dtft_peak_hz(x: &[f32], rate: u32, lo: f64, hi: f64, step: f64) -> f64 {
    let n = x.len() as f64;
    let windowed: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()))
        .collect();
    let mut best = (lo, -1.0);
    let mut f = lo;
    while f <= hi {
        let w = 2.0 * PI * f / rate as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &v) in windowed.iter().enumerate() {
            re += v * (w * i as f64).cos();
            im -= v * (w * i as f64).sin();
        }
        let mag = re.hypot(im);
        if mag > best.1 {
            best = (f, mag);
        }
        f += step;
    }
    best.0
}

/// Concordance from raw sums in a single pass.
pub fn ccc_raw_moments(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let (mx, my) = (sx / n, sy / n);
    let vx = sxx / n - mx * mx;
    let vy = syy / n - my * my;
    let cov = sxy / n - mx * my;
    2.0 * cov / (vx + vy + (mx - my).powi(2))
}

/// Quantile by sorting and interpolating at `q·(n-1)`.
pub fn sorted_quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] * (1.0 - (pos - lo as f64)) + s[hi] * (pos - lo as f64)
}
