//! Iterative radix-2 FFT over `Complex64`.
//!
//! Only power-of-two sizes are supported; every frame length in the crate is
//! constrained to a power of two.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Debug, Clone)]
pub struct Fft {
    size: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    /// Panics if `size` is not a power of two.
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two(), "FFT size must be a power of two");
        let bits = size.trailing_zeros();
        let bitrev = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / size as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self { size, twiddles, bitrev }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place forward transform (no scaling).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// In-place inverse transform, scaled by `1/size`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.size as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.size);
        for i in 0..self.size {
            let j = self.bitrev[i];
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.size {
            let half = len / 2;
            let stride = self.size / len;
            for start in (0..self.size).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Forward transform of a real signal, returning the `size/2 + 1` non-negative bins.
    pub fn forward_real(&self, signal: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward(&mut buf);
        buf.truncate(self.size / 2 + 1);
        buf
    }

    /// Inverse of a Hermitian spectrum given by its `size/2 + 1` non-negative bins.
    pub fn inverse_real(&self, half: &[Complex64]) -> Vec<f64> {
        assert_eq!(half.len(), self.size / 2 + 1);
        let mut buf = Vec::with_capacity(self.size);
        buf.extend_from_slice(half);
        for k in (1..self.size / 2).rev() {
            buf.push(half[k].conj());
        }
        // DC and Nyquist bins of a real signal are real.
        buf[0].im = 0.0;
        buf[self.size / 2].im = 0.0;
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    acc + v * Complex64::new(a.cos(), a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut y = x.clone();
        Fft::new(64).forward(&mut y);
        for (a, b) in y.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn real_round_trip() {
        let fft = Fft::new(256);
        let x: Vec<f64> = (0..256).map(|i| ((i * i) as f64 * 0.013).sin()).collect();
        let back = fft.inverse_real(&fft.forward_real(&x));
        for (a, b) in x.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn size_one_is_identity() {
        let mut d = vec![Complex64::new(3.0, -1.0)];
        Fft::new(1).forward(&mut d);
        assert_eq!(d[0], Complex64::new(3.0, -1.0));
    }
}
