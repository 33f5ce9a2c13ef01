//! Sliding correlation against the periodic body replica, coherently
//! averaged over the body repetitions.

use num_complex::Complex;

use super::calibration::CalibrationProfile;
use crate::dsp::FftPair;
use crate::error::{Error, Result};
use crate::waveform::{periodic_replica, BasebandSignal, FrameLayout, PulseShape};
use crate::Real;

/// Complex correlation profile of one frame, kept in both domains.
///
/// `spectrum[k]` is the repetition-averaged `X(k)·S*(k)/(L·E_p)` and
/// `template[k] = |S(k)|²/(L·E_p)`, so a unit-gain tap at delay `τ` samples
/// contributes `template[k]·exp(−j2πk̃τ/N)` (with `k̃` the signed bin index)
/// and reads 1 at its lag in `response`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile<T: Real> {
    pub spectrum: Vec<Complex<T>>,
    pub template: Vec<T>,
    /// Inverse transform of `spectrum`: complex amplitude per lag.
    pub response: Vec<Complex<T>>,
    pub sample_rate: T,
    pub repetitions_used: usize,
    /// Fewer repetitions than the layout carries were available.
    pub partial: bool,
}

impl<T: Real> PowerDelayProfile<T> {
    pub(crate) fn from_spectrum(
        spectrum: Vec<Complex<T>>,
        template: Vec<T>,
        sample_rate: T,
        repetitions_used: usize,
        partial: bool,
    ) -> Self {
        let mut response = spectrum.clone();
        FftPair::new(response.len()).inverse(&mut response);
        Self {
            spectrum,
            template,
            response,
            sample_rate,
            repetitions_used,
            partial,
        }
    }

    /// Noise-free profile of point components `(delay_ns, amplitude)` seen
    /// through `template`.
    pub fn synthesize(components: &[(T, Complex<T>)], template: Vec<T>, sample_rate: T) -> Self {
        let n = template.len();
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n];
        for &(delay_ns, g) in components {
            let tau = delay_ns * sample_rate * T::lit(1e-9);
            for (k, s) in spectrum.iter_mut().enumerate() {
                let theta = -T::TAU() * signed_bin::<T>(k, n) * tau / T::from_usize_lossy(n);
                *s += g * Complex::from_polar(template[k], theta);
            }
        }
        Self::from_spectrum(spectrum, template, sample_rate, 0, false)
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Delay of lag `m` in ns, with lags past `7N/8` read as small negative delays.
    pub fn lag_delay_ns(&self, m: usize) -> T {
        let n = self.len();
        let signed = if 8 * m >= 7 * n { m as f64 - n as f64 } else { m as f64 };
        T::lit(signed * 1e9) / self.sample_rate
    }

    /// `|response|²` in dB relative to a unit-gain tap.
    pub fn power_db(&self) -> Vec<T> {
        self.response
            .iter()
            .map(|v| crate::scalar::to_db(v.norm_sqr().max(T::min_positive_value())))
            .collect()
    }
}

#[inline]
pub(crate) fn signed_bin<T: Real>(k: usize, n: usize) -> T {
    if 2 * k < n {
        T::from_usize_lossy(k)
    } else {
        -T::from_usize_lossy(n - k)
    }
}

/// Start indices of the body repetitions of the frame at `frame_offset`
/// that fit entirely inside a capture of `len` samples.
pub(crate) fn body_windows<T: Real>(
    len: usize,
    layout: &FrameLayout<T>,
    samples_per_chip: usize,
    frame_offset: usize,
) -> Vec<usize> {
    let period = layout.body.len() * samples_per_chip;
    let first = frame_offset + layout.header.len() * samples_per_chip;
    (0..layout.repetitions)
        .map(|r| first + r * period)
        .take_while(|s| s + period <= len)
        .collect()
}

/// Correlates the body repetitions of the frame starting at `frame_offset`
/// in a carrier-corrected baseband `signal`. With a calibration profile the
/// averaged spectrum is divided by its normalized response.
pub fn correlate_profile<T: Real>(
    signal: &BasebandSignal<T>,
    layout: &FrameLayout<T>,
    shape: &PulseShape<T>,
    frame_offset: usize,
    calibration: Option<&CalibrationProfile<T>>,
) -> Result<PowerDelayProfile<T>> {
    shape.validate()?;
    let replica = periodic_replica(&layout.body, shape);
    correlate_with(
        &signal.to_baseband(),
        &replica,
        layout,
        shape,
        frame_offset,
        calibration,
    )
}

pub(crate) fn correlate_with<T: Real>(
    signal: &BasebandSignal<T>,
    replica: &[Complex<T>],
    layout: &FrameLayout<T>,
    shape: &PulseShape<T>,
    frame_offset: usize,
    calibration: Option<&CalibrationProfile<T>>,
) -> Result<PowerDelayProfile<T>> {
    let n = replica.len();
    let windows = body_windows(signal.len(), layout, shape.samples_per_chip, frame_offset);
    if windows.is_empty() {
        return Err(Error::Empty("body repetition within the capture"));
    }
    let plan = FftPair::new(n);
    let mut s = replica.to_vec();
    plan.forward(&mut s);

    let zero = Complex::new(T::zero(), T::zero());
    let mut acc = vec![zero; n];
    let mut buf = vec![zero; n];
    for &start in &windows {
        buf.copy_from_slice(&signal.samples[start..start + n]);
        plan.forward(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += *b;
        }
    }
    let norm = T::from_usize_lossy(layout.body.len() * shape.samples_per_chip)
        * T::from_usize_lossy(windows.len());
    let template_norm = T::from_usize_lossy(layout.body.len() * shape.samples_per_chip);
    let mut spectrum: Vec<Complex<T>> = acc
        .iter()
        .zip(&s)
        .map(|(x, sk)| *x * sk.conj() / norm)
        .collect();
    let mut template: Vec<T> = s.iter().map(|sk| sk.norm_sqr() / template_norm).collect();
    if let Some(cal) = calibration {
        let grid = cal.grid(n, signal.sample_rate);
        for k in 0..n {
            spectrum[k] = spectrum[k] * grid.inverse[k];
            template[k] *= grid.template_scale[k];
        }
    }
    let partial = windows.len() < layout.repetitions;
    Ok(PowerDelayProfile::from_spectrum(
        spectrum,
        template,
        signal.sample_rate,
        windows.len(),
        partial,
    ))
}

/// Mismatch between the transmitted frame and the periodic body model around
/// the start of the body. Delayed paths carry header samples into the first
/// repetition window; this model lets the receiver subtract them once the
/// path delays are known.
#[derive(Debug, Clone)]
pub(crate) struct BoundaryModel<T: Real> {
    /// `frame[body_start + m] − replica[m mod N]` for `m ∈ [−N, N)`.
    diff: Vec<Complex<T>>,
    replica_spectrum: Vec<Complex<T>>,
}

impl<T: Real> BoundaryModel<T> {
    pub fn new(frame: &[Complex<T>], replica: &[Complex<T>], body_start: usize) -> Self {
        let n = replica.len();
        let zero = Complex::new(T::zero(), T::zero());
        let diff = (0..2 * n)
            .map(|j| {
                let m = j as isize - n as isize;
                let idx = body_start as isize + m;
                let f = if idx >= 0 && (idx as usize) < frame.len() {
                    frame[idx as usize]
                } else {
                    zero
                };
                f - replica[m.rem_euclid(n as isize) as usize]
            })
            .collect();
        let mut replica_spectrum = replica.to_vec();
        FftPair::new(n).forward(&mut replica_spectrum);
        Self {
            diff,
            replica_spectrum,
        }
    }

    /// Subtracts the boundary leakage of paths at `taus` (samples, relative
    /// to the window origin) with gains `gains` from the first-repetition
    /// share of `pdp`.
    pub fn correct(
        &self,
        pdp: &mut PowerDelayProfile<T>,
        taus: &[T],
        gains: &[Complex<T>],
        chips_times_sps: usize,
        calibration: Option<&CalibrationProfile<T>>,
    ) {
        let n = self.replica_spectrum.len();
        if pdp.repetitions_used == 0 || taus.is_empty() || pdp.len() != n {
            return;
        }
        let m = 4 * n;
        let plan = FftPair::new(m);
        let zero = Complex::new(T::zero(), T::zero());
        let mut v = self.diff.clone();
        v.resize(m, zero);
        plan.forward(&mut v);
        for (k, vk) in v.iter_mut().enumerate() {
            let theta = -T::TAU() * signed_bin::<T>(k, m) / T::from_usize_lossy(m);
            let h: Complex<T> = taus
                .iter()
                .zip(gains)
                .map(|(&tau, &g)| g * Complex::from_polar(T::one(), theta * tau))
                .sum();
            *vk = *vk * h;
        }
        plan.inverse(&mut v);
        let mut leak = v[n..2 * n].to_vec();
        let small = FftPair::new(n);
        small.forward(&mut leak);
        let norm = T::from_usize_lossy(chips_times_sps) * T::from_usize_lossy(pdp.repetitions_used);
        let grid = calibration.map(|c| c.grid(n, pdp.sample_rate));
        for k in 0..n {
            let mut d = leak[k] * self.replica_spectrum[k].conj() / norm;
            if let Some(g) = &grid {
                d = d * g.inverse[k];
            }
            pdp.spectrum[k] -= d;
        }
        pdp.response = pdp.spectrum.clone();
        small.inverse(&mut pdp.response);
    }
}
