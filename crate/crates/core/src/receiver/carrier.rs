//! Dual-loop carrier recovery on the per-repetition correlation readings.
//!
//! Each body repetition yields one complex reading (the zero-lag correlation
//! with the replica). The first loop, a second-order PLL, tracks and unwraps
//! the reading phase; the least-squares slope of the unwrapped phase is the
//! frequency offset. The second loop runs on the ramp-compensated readings
//! and returns their common phase.

use num_complex::Complex;

use super::correlate::body_windows;
use crate::error::{Error, Result};
use crate::scalar::wrap_phase;
use crate::waveform::{periodic_replica, rotate, BasebandSignal, FrameLayout, PulseShape};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllConfig<T> {
    pub damping: T,
    /// Noise bandwidth times the reading interval (`B_n·T`).
    pub bandwidth: T,
    /// Phase-error variance (rad²) above which the loops report unlocked.
    pub variance_limit: T,
}

impl<T: Real> Default for PllConfig<T> {
    fn default() -> Self {
        Self {
            damping: T::lit(0.707),
            bandwidth: T::lit(0.1),
            variance_limit: T::lit(0.25),
        }
    }
}

impl<T: Real> PllConfig<T> {
    /// Proportional and integral gains of the discrete loop filter.
    pub fn gains(&self) -> (T, T) {
        let z = self.damping;
        let theta = self.bandwidth / (z + T::one() / (T::lit(4.0) * z));
        let d = T::one() + T::lit(2.0) * z * theta + theta * theta;
        (T::lit(4.0) * z * theta / d, T::lit(4.0) * theta * theta / d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero()) || !(self.bandwidth > T::zero()) || !(self.variance_limit > T::zero()) {
            return Err(Error::InvalidParameter(
                "PLL damping, bandwidth and variance limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierEstimate<T> {
    pub freq_offset_hz: T,
    /// Phase at the first header sample, in `(−π, π]`.
    pub phase_offset: T,
    pub readings_averaged: usize,
    /// Residual phase-error variance of the second loop, rad².
    pub phase_error_variance: T,
}

/// Estimates the carrier offset of the frame starting at `frame_offset` in a
/// baseband `signal`.
pub fn estimate_carrier<T: Real>(
    signal: &BasebandSignal<T>,
    layout: &FrameLayout<T>,
    shape: &PulseShape<T>,
    frame_offset: usize,
    pll: &PllConfig<T>,
) -> Result<CarrierEstimate<T>> {
    shape.validate()?;
    let replica = periodic_replica(&layout.body, shape);
    estimate_with(&signal.to_baseband(), &replica, layout, shape, frame_offset, pll)
}

pub(crate) fn estimate_with<T: Real>(
    signal: &BasebandSignal<T>,
    replica: &[Complex<T>],
    layout: &FrameLayout<T>,
    shape: &PulseShape<T>,
    frame_offset: usize,
    pll: &PllConfig<T>,
) -> Result<CarrierEstimate<T>> {
    pll.validate()?;
    let n = replica.len();
    let windows = body_windows(signal.len(), layout, shape.samples_per_chip, frame_offset);
    if windows.is_empty() {
        return Err(Error::Empty("body repetition within the capture"));
    }
    let fs = signal.sample_rate;
    let readings: Vec<Complex<T>> = windows
        .iter()
        .map(|&s| {
            signal.samples[s..s + n]
                .iter()
                .zip(replica)
                .map(|(x, r)| *x * r.conj())
                .sum()
        })
        .collect();
    let half = T::from_usize_lossy(n - 1) / T::lit(2.0);
    let times: Vec<T> = windows
        .iter()
        .map(|&s| (T::from_usize_lossy(s - frame_offset) + half) / fs)
        .collect();

    let freq = if readings.len() < 2 {
        T::zero()
    } else {
        let unwrapped = track_phase(&readings, pll);
        slope(&times, &unwrapped) / T::TAU()
    };

    // second loop: common phase of the ramp-compensated readings
    let derotated: Vec<Complex<T>> = readings
        .iter()
        .zip(&times)
        .map(|(z, t)| *z * Complex::from_polar(T::one(), -T::TAU() * freq * *t))
        .collect();
    let sum: Complex<T> = derotated.iter().copied().sum();
    let phase = sum.arg();
    let variance = derotated
        .iter()
        .map(|z| {
            let e = wrap_phase(z.arg() - phase);
            e * e
        })
        .sum::<T>()
        / T::from_usize_lossy(derotated.len());
    if !(variance <= pll.variance_limit) {
        return Err(Error::Unlocked {
            variance: variance.as_f64(),
            limit: pll.variance_limit.as_f64(),
        });
    }
    Ok(CarrierEstimate {
        freq_offset_hz: freq,
        phase_offset: wrap_phase(phase),
        readings_averaged: readings.len(),
        phase_error_variance: variance,
    })
}

/// Runs the second-order PLL over the readings and returns the unwrapped
/// measured phase of each one.
fn track_phase<T: Real>(readings: &[Complex<T>], pll: &PllConfig<T>) -> Vec<T> {
    let (kp, ki) = pll.gains();
    // coarse per-reading increment from the lag-1 product
    let lag1: Complex<T> = readings.windows(2).map(|w| w[1] * w[0].conj()).sum();
    let mut omega = lag1.arg();
    let mut theta = readings[0].arg();
    let mut out = Vec::with_capacity(readings.len());
    for z in readings {
        let err = wrap_phase(z.arg() - theta);
        out.push(theta + err);
        omega += ki * err;
        theta += omega + kp * err;
    }
    out
}

fn slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        sxy += (*a - mx) * (*b - my);
        sxx += (*a - mx) * (*a - mx);
    }
    sxy / sxx
}

/// Removes the estimated carrier: sample `n` is multiplied by
/// `exp(−j(2πf̂(n − frame_offset)/fs + φ̂))`.
pub fn correct_carrier<T: Real>(
    signal: &BasebandSignal<T>,
    estimate: &CarrierEstimate<T>,
    frame_offset: usize,
) -> BasebandSignal<T> {
    let mut out = signal.clone();
    let t0 = -T::from_usize_lossy(frame_offset) / signal.sample_rate;
    rotate(&mut out.samples, -estimate.freq_offset_hz, signal.sample_rate, t0);
    let derot = Complex::from_polar(T::one(), -estimate.phase_offset);
    for s in out.samples.iter_mut() {
        *s = *s * derot;
    }
    out
}
