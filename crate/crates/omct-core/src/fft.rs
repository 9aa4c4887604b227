//! Thin FFT wrappers.
//!
//! Planners are created per call; nothing here holds shared mutable state, so
//! callers may transform from any number of threads.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn forward_in_place(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

pub(crate) fn inverse_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency (Hz) of DFT bin `k` for an `n`-sample grid with spacing `dt`.
pub(crate) fn bin_freq_hz(k: usize, n: usize, dt: f64) -> f64 {
    let k = k as i64;
    let n = n as i64;
    let signed = if k <= n / 2 { k } else { k - n };
    signed as f64 / (n as f64 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_identity() {
        let mut buf: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.1).cos()))
            .collect();
        let orig = buf.clone();
        forward_in_place(&mut buf);
        inverse_in_place(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bin_frequencies_signed() {
        let n = 8;
        let dt = 0.5;
        let fs: Vec<f64> = (0..n).map(|k| bin_freq_hz(k, n, dt)).collect();
        assert_eq!(fs[0], 0.0);
        assert_eq!(fs[1], 0.25);
        assert_eq!(fs[4], 1.0); // Nyquist
        assert_eq!(fs[7], -0.25);
    }
}
