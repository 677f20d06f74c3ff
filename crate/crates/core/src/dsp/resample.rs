//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.
//!
//! The pass band ends at 7/16 of the lower of the two rates and the stop band
//! starts at its Nyquist frequency, so a 16 kHz target keeps tones below
//! 7 kHz and suppresses everything from 8 kHz upward by at least 80 dB
//! (design target).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::error::{Error, Result};

pub const MIN_SOURCE_RATE: u32 = 8_000;

const STOPBAND_DB: f64 = 80.0;
/// Largest interpolation factor for which a polyphase table is precomputed.
const MAX_TABLE_PHASES: u64 = 4_096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    let mut k = 1.0;
    while term > 1e-16 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    half_width: f64,
    beta: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(from: u32, to: u32) -> Self {
        let min_rate = from.min(to) as f64;
        let cutoff_hz = min_rate * 15.0 / 32.0;
        let transition_hz = min_rate / 16.0;
        // Kaiser's length estimate, expressed as a duration in seconds.
        let duration = (STOPBAND_DB - 7.95) / (2.285 * 2.0 * PI * transition_hz);
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        Self {
            cutoff: cutoff_hz / from as f64,
            half_width: 0.5 * duration * from as f64,
            beta,
            i0_beta: bessel_i0(beta),
        }
    }

    /// Impulse response at offset `tau` input samples.
    fn eval(&self, tau: f64) -> f64 {
        let r = tau / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(self.beta * Float::sqrt(1.0 - r * r)) / self.i0_beta;
        let arg = 2.0 * self.cutoff * tau;
        let sinc = if arg.abs() < 1e-12 {
            1.0
        } else {
            Float::sin(PI * arg) / (PI * arg)
        };
        2.0 * self.cutoff * sinc * window
    }
}

/// Output length `round(len · to / from)`.
pub fn resampled_len(len: usize, from: u32, to: u32) -> usize {
    ((len as u128 * to as u128 + from as u128 / 2) / from as u128) as usize
}

/// Converts `samples` from `from` Hz to `to` Hz. Output is clamped to [-1, 1].
pub fn resample(samples: &[f32], from: u32, to: u32) -> Result<Vec<f32>> {
    if from < MIN_SOURCE_RATE {
        return Err(Error::SampleRateTooLow(from));
    }
    if to == 0 {
        return Err(Error::Config("target sample rate must be positive".into()));
    }
    if from == to {
        return Ok(samples.to_vec());
    }
    let g = gcd(from as u64, to as u64);
    let (up, down) = (to as u64 / g, from as u64 / g);
    let kernel = Kernel::new(from, to);
    let reach = Float::ceil(kernel.half_width) as i64;
    let taps = (2 * reach + 2) as usize;

    // coefficients for input offsets m = -reach ..= reach + 1 around floor(t)
    let phase_taps = |phase: u64, out: &mut [f64]| {
        let frac = phase as f64 / up as f64;
        let mut sum = 0.0;
        for (i, c) in out.iter_mut().enumerate() {
            let m = i as i64 - reach;
            *c = kernel.eval(frac - m as f64);
            sum += *c;
        }
        if sum.abs() > 1e-12 {
            for c in out.iter_mut() {
                *c /= sum;
            }
        }
    };
    let table = (up <= MAX_TABLE_PHASES).then(|| {
        let mut t = vec![0.0; up as usize * taps];
        for (phase, row) in t.chunks_exact_mut(taps).enumerate() {
            phase_taps(phase as u64, row);
        }
        t
    });

    let n_out = resampled_len(samples.len(), from, to);
    let len = samples.len() as i64;
    let mut scratch = vec![0.0; taps];
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let coeffs: &[f64] = match &table {
            Some(t) => &t[phase as usize * taps..][..taps],
            None => {
                phase_taps(phase, &mut scratch);
                &scratch
            }
        };
        let mut acc = 0.0;
        for (i, &c) in coeffs.iter().enumerate() {
            let j = base + i as i64 - reach;
            if (0..len).contains(&j) {
                acc += c * samples[j as usize] as f64;
            }
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, len: usize, amp: f64) -> Vec<f32> {
        (0..len)
            .map(|i| (amp * Float::sin(2.0 * PI * freq * i as f64 / rate as f64)) as f32)
            .collect()
    }

    fn energy(x: &[f32]) -> f64 {
        // skip the edges where the kernel runs off the signal
        let body = &x[400..x.len() - 400];
        body.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / body.len() as f64
    }

    #[test]
    fn length_follows_rate_ratio() {
        assert_eq!(resampled_len(48_000, 48_000, 16_000), 16_000);
        assert_eq!(resampled_len(44_100, 44_100, 16_000), 16_000);
        assert_eq!(resampled_len(10, 44_100, 16_000), 4);
        let out = resample(&vec![0.0; 22_050], 44_100, 16_000).unwrap();
        assert_eq!(out.len(), 8_000);
    }

    #[test]
    fn rejects_low_source_rate() {
        assert_eq!(resample(&[0.0; 10], 7_999, 16_000), Err(Error::SampleRateTooLow(7_999)));
    }

    #[test]
    fn passband_tone_keeps_its_level() {
        let out = resample(&tone(1_000.0, 48_000, 48_000, 0.5), 48_000, 16_000).unwrap();
        let ratio = energy(&out) / 0.125;
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn stopband_tone_is_suppressed_for_awkward_ratios() {
        for &from in &[44_100, 22_050, 96_000] {
            let reference = resample(&tone(1_000.0, from, from as usize, 0.5), from, 16_000).unwrap();
            let alias = resample(&tone(9_000.0, from, from as usize, 0.5), from, 16_000).unwrap();
            let db = 10.0 * Float::log10(energy(&reference) / energy(&alias));
            assert!(db >= 40.0, "{from} Hz: {db} dB");
        }
    }

    #[test]
    fn upsampling_preserves_dc() {
        let out = resample(&vec![0.25; 8_000], 8_000, 16_000).unwrap();
        assert_eq!(out.len(), 16_000);
        assert!(out[100..15_900].iter().all(|&v| (v - 0.25).abs() < 1e-4));
    }
}
