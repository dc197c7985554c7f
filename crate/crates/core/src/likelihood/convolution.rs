//! Truncated linear convolution of real sequences, direct or through the FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Series shorter than this are convolved directly in [`ConvolutionMode::Auto`].
pub const FFT_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMode {
    /// `O(L²)` schoolbook sum.
    Direct,
    /// `O(L log L)` through a complex FFT.
    Fft,
    /// Direct below [`FFT_THRESHOLD`], FFT otherwise.
    #[default]
    Auto,
}

/// Full linear convolution `(a * b)_j = Σ_m a_m b_{j−m}`.
pub fn convolve(a: &[f64], b: &[f64], mode: ConvolutionMode) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    convolve_truncated(a, b, a.len() + b.len() - 1, mode)
}

/// Linear convolution keeping only the first `out_len` coefficients.
pub fn convolve_truncated(a: &[f64], b: &[f64], out_len: usize, mode: ConvolutionMode) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    Convolver::new(a.len().max(b.len()), out_len, mode).convolve(a, b)
}

/// A reusable convolution kernel for operands of bounded length.
///
/// The FFT plans are built once and shared, so a single `Convolver` can serve
/// many rows of a dynamic-programming table, also from several threads.
#[derive(Clone)]
pub struct Convolver {
    out_len: usize,
    use_fft: bool,
    size: usize,
    forward: Option<Arc<dyn Fft<f64>>>,
    inverse: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("out_len", &self.out_len)
            .field("use_fft", &self.use_fft)
            .field("size", &self.size)
            .finish()
    }
}

impl Convolver {
    /// Operands may have up to `max_len` entries; outputs have `out_len`.
    pub fn new(max_len: usize, out_len: usize, mode: ConvolutionMode) -> Self {
        let use_fft = match mode {
            ConvolutionMode::Direct => false,
            ConvolutionMode::Fft => true,
            ConvolutionMode::Auto => max_len.min(out_len) >= FFT_THRESHOLD,
        };
        // operands are truncated to out_len; the full product must not wrap
        let operand = max_len.min(out_len).max(1);
        let size = (2 * operand - 1).next_power_of_two();
        let (forward, inverse) = if use_fft {
            let mut planner = FftPlanner::new();
            (Some(planner.plan_fft_forward(size)), Some(planner.plan_fft_inverse(size)))
        } else {
            (None, None)
        };
        Self { out_len, use_fft, size, forward, inverse }
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn convolve(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return vec![0.0; self.out_len];
        }
        if self.use_fft {
            self.convolve_fft(a, b)
        } else {
            convolve_direct(a, b, self.out_len)
        }
    }

    fn convolve_fft(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (forward, inverse) = match (&self.forward, &self.inverse) {
            (Some(f), Some(i)) => (f, i),
            _ => unreachable!("FFT plans are built whenever use_fft is set"),
        };
        let la = a.len().min(self.out_len);
        let lb = b.len().min(self.out_len);
        assert!(la + lb - 1 <= self.size, "operand longer than the planned transform");
        // z = a + i·b, then a*b = Im(z*z) / 2
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (slot, &v) in buf.iter_mut().zip(&a[..la]) {
            slot.re = v;
        }
        for (slot, &v) in buf.iter_mut().zip(&b[..lb]) {
            slot.im = v;
        }
        forward.process(&mut buf);
        for z in buf.iter_mut() {
            *z = *z * *z;
        }
        inverse.process(&mut buf);
        let norm = 0.5 / self.size as f64;
        let mut out: Vec<f64> = buf.iter().take(self.out_len).map(|z| z.im * norm).collect();
        out.resize(self.out_len, 0.0);
        out
    }
}

fn convolve_direct(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (j, slot) in out.iter_mut().enumerate() {
        let lo = j.saturating_sub(b.len() - 1);
        let hi = j.min(a.len() - 1);
        if lo > hi {
            continue;
        }
        *slot = (lo..=hi).map(|m| a[m] * b[j - m]).sum();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_examples() {
        for mode in [ConvolutionMode::Direct, ConvolutionMode::Fft] {
            let c = convolve(&[1.0, 1.0], &[1.0, 1.0], mode);
            assert_eq!(c.len(), 3);
            for (x, y) in c.iter().zip([1.0, 2.0, 1.0]) {
                assert!((x - y).abs() < 1e-14);
            }
            let b = [0.3, -1.5, 2.0, 4.25];
            let c = convolve_truncated(&[1.0, 0.0, 0.0], &b, 4, mode);
            for (x, y) in c.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
            let t = convolve_truncated(&[1.0, 1.0], &[1.0, 1.0], 2, mode);
            assert_eq!(t.len(), 2);
            assert!((t[1] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_matches_direct_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for len in [1usize, 5, 63, 64, 65, 200] {
            let a: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let d = convolve(&a, &b, ConvolutionMode::Direct);
            let f = convolve(&a, &b, ConvolutionMode::Fft);
            let peak = d.iter().cloned().fold(0.0, f64::max);
            let err = d.iter().zip(&f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * peak, "len {len}: {err}");
            let t = convolve_truncated(&a, &b, len, ConvolutionMode::Fft);
            assert_eq!(t.len(), len);
            for (x, y) in t.iter().zip(&d) {
                assert!((x - y).abs() <= 1e-10 * peak);
            }
        }
    }

    #[test]
    fn auto_switches_at_threshold() {
        assert!(!Convolver::new(FFT_THRESHOLD - 1, FFT_THRESHOLD - 1, ConvolutionMode::Auto).use_fft);
        assert!(Convolver::new(FFT_THRESHOLD, FFT_THRESHOLD, ConvolutionMode::Auto).use_fft);
    }
}
