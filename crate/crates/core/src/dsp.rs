//! FFT plumbing and small spectral helpers used across the signal chain.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Real;

/// A forward/inverse transform pair of one length.
pub struct FftPair<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    len: usize,
}

impl<T: Real> FftPair<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
    }

    /// Inverse transform scaled by `1/len`.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        let scale = T::one() / T::from_usize_lossy(self.len);
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }
}

pub fn fft<T: Real>(buf: &mut [Complex<T>]) {
    FftPair::new(buf.len()).forward(buf);
}

pub fn ifft<T: Real>(buf: &mut [Complex<T>]) {
    FftPair::new(buf.len()).inverse(buf);
}

/// Smallest `2^a·3^b·5^c` that is at least `n`.
pub fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Signed frequency of DFT bin `k` for an `n`-point transform at `sample_rate`.
#[inline]
pub fn bin_frequency<T: Real>(k: usize, n: usize, sample_rate: T) -> T {
    let kk = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
    T::lit(kk / n as f64) * sample_rate
}

/// Averaged Hann-windowed periodogram (50 % overlap) in natural DFT bin order.
///
/// The estimate is the mean of `|X_k|² / Σw²`, so a white sequence of
/// per-sample variance `σ²` yields `σ²` in every bin.
pub fn welch_psd<T: Real>(x: &[Complex<T>], segment_len: usize) -> Vec<T> {
    assert!(segment_len >= 2 && x.len() >= segment_len);
    let window: Vec<T> = (0..segment_len)
        .map(|i| {
            let phase = T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(segment_len);
            T::lit(0.5) * (T::one() - phase.cos())
        })
        .collect();
    let wpow: T = window.iter().map(|w| *w * *w).sum();
    let plan = FftPair::new(segment_len);
    let hop = segment_len / 2;
    let mut acc = vec![T::zero(); segment_len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); segment_len];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment_len <= x.len() {
        for (b, (s, w)) in buf.iter_mut().zip(x[start..].iter().zip(&window)) {
            *b = *s * *w;
        }
        plan.forward(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let norm = wpow * T::from_usize_lossy(count);
    acc.into_iter().map(|a| a / norm).collect()
}

/// Piecewise-linear interpolation on an increasing grid, clamped at both ends.
pub fn interp_linear<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|v| *v <= x).min(n - 1);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + (ys[hi] - ys[lo]) * t
}
