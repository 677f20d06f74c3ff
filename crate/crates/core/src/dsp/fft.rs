use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

/// Iterative radix-2 complex FFT with precomputed twiddles.
#[derive(Clone, Debug)]
pub struct Fft {
    size: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two() && size >= 2, "FFT size must be a power of two");
        let half = size / 2;
        let cos = (0..half)
            .map(|k| Float::cos(-2.0 * PI * k as f64 / size as f64))
            .collect();
        let sin = (0..half)
            .map(|k| Float::sin(-2.0 * PI * k as f64 / size as f64))
            .collect();
        let bits = size.trailing_zeros();
        let bitrev = (0..size).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        Self { size, cos, sin, bitrev }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place forward transform `X[k] = Σ x[n]·e^{-2πikn/N}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.size;
        assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * step], self.sin[k * step]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matches_direct_dft() {
        let n = 64;
        let fft = Fft::new(n);
        let x: Vec<f64> = (0..n).map(|i| Float::sin(i as f64 * 0.37) + 0.1 * i as f64).collect();
        let mut re = x.clone();
        let mut im = vec![0.0; n];
        fft.forward(&mut re, &mut im);
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                sr += v * Float::cos(a);
                si += v * Float::sin(a);
            }
            assert!((re[k] - sr).abs() < 1e-9 && (im[k] - si).abs() < 1e-9);
        }
    }
}
