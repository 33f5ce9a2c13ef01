//! Frontend calibration from power spectra:
//! `H(k) = ((P_r(k) − P_n) / P_s(k))^{1/2}`, with the radicand floored at
//! `0.01·P_s(k)`.
//!
//! `P_n` is the noise level per bin in the same units as the spectra (with
//! [`crate::dsp::welch_psd`] this equals the full-band noise power).

use num_complex::Complex;

use crate::dsp;
use crate::error::{Error, Result};
use crate::scalar::{from_db, to_db};
use crate::waveform::BasebandSignal;
use crate::Real;

/// Bins whose transmit PSD is within this many dB of the peak are in band.
pub const IN_BAND_DB: f64 = -20.0;
pub const DEFAULT_WELCH_SEGMENT: usize = 512;
const RADICAND_FLOOR: f64 = 0.01;
/// Transmit PSD below this (relative to peak) marks noise-only bins.
const NOISE_BIN_DB: f64 = -40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile<T: Real> {
    /// Ascending, relative to the carrier.
    pub frequencies_hz: Vec<T>,
    /// Raw `H(k)`; not normalized.
    pub response: Vec<Complex<T>>,
    /// `H(k)` without the radicand floor (0 where noise exceeds signal).
    pub unfloored: Vec<T>,
    pub tx_psd: Vec<T>,
    pub noise_power: T,
    /// Bins where the radicand floor was applied.
    pub clamped: Vec<bool>,
    pub in_band: Vec<bool>,
    /// Median of `|H|` over the in-band bins.
    pub median_magnitude: T,
}

/// Builds `H(k)` from receive and transmit power spectra on one grid.
pub fn build_calibration<T: Real>(
    frequencies_hz: &[T],
    rx_power_spectrum: &[T],
    tx_power_spectrum: &[T],
    noise_power: T,
) -> Result<CalibrationProfile<T>> {
    let n = frequencies_hz.len();
    if rx_power_spectrum.len() != n {
        return Err(Error::GridMismatch(rx_power_spectrum.len(), n));
    }
    if tx_power_spectrum.len() != n {
        return Err(Error::GridMismatch(tx_power_spectrum.len(), n));
    }
    if n < 2 {
        return Err(Error::Empty("calibration spectra"));
    }
    if rx_power_spectrum.iter().any(|p| !(*p >= T::zero())) {
        return Err(Error::InvalidParameter("receive power spectrum must be ≥ 0".into()));
    }
    if tx_power_spectrum.iter().any(|p| !(*p >= T::zero())) {
        return Err(Error::InvalidParameter("transmit power spectrum must be ≥ 0".into()));
    }
    if !(noise_power >= T::zero()) {
        return Err(Error::InvalidParameter("noise power must be ≥ 0".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| frequencies_hz[a].partial_cmp(&frequencies_hz[b]).expect("finite frequencies"));
    if order.windows(2).any(|w| frequencies_hz[w[0]] == frequencies_hz[w[1]]) {
        return Err(Error::InvalidParameter("duplicate calibration frequencies".into()));
    }
    let tx_max = tx_power_spectrum.iter().fold(T::zero(), |m, &v| m.max(v));
    if tx_max <= T::zero() {
        return Err(Error::InvalidParameter("transmit spectrum is empty".into()));
    }
    let band_floor = tx_max * from_db(T::lit(IN_BAND_DB));
    let floor = T::lit(RADICAND_FLOOR);

    let mut out = CalibrationProfile {
        frequencies_hz: Vec::with_capacity(n),
        response: Vec::with_capacity(n),
        unfloored: Vec::with_capacity(n),
        tx_psd: Vec::with_capacity(n),
        noise_power,
        clamped: Vec::with_capacity(n),
        in_band: Vec::with_capacity(n),
        median_magnitude: T::one(),
    };
    for &i in &order {
        let ps = tx_power_spectrum[i];
        let pr = rx_power_spectrum[i];
        let (h, raw, clamped) = if ps > T::zero() {
            let radicand = pr - noise_power;
            let clamped = radicand < floor * ps;
            let h = (radicand.max(floor * ps) / ps).sqrt();
            (h, (radicand.max(T::zero()) / ps).sqrt(), clamped)
        } else {
            (T::one(), T::one(), true)
        };
        out.frequencies_hz.push(frequencies_hz[i]);
        out.response.push(Complex::new(h, T::zero()));
        out.unfloored.push(raw);
        out.tx_psd.push(ps);
        out.clamped.push(clamped);
        out.in_band.push(ps >= band_floor);
    }
    let mut mags: Vec<T> = out
        .response
        .iter()
        .zip(&out.in_band)
        .filter(|(_, &b)| b)
        .map(|(h, _)| h.norm())
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.median_magnitude = if mags.is_empty() {
        T::one()
    } else if mags.len() % 2 == 1 {
        mags[mags.len() / 2]
    } else {
        (mags[mags.len() / 2 - 1] + mags[mags.len() / 2]) / T::lit(2.0)
    };
    Ok(out)
}

/// Per-bin factors of a profile resampled onto an FFT grid.
#[derive(Debug, Clone)]
pub(crate) struct CalibrationGrid<T> {
    /// Multiplier applied to the received spectrum (1/normalized H in band).
    pub inverse: Vec<T>,
    /// Residual gain the calibrated spectrum still carries where H was floored.
    pub template_scale: Vec<T>,
}

impl<T: Real> CalibrationProfile<T> {
    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    /// `|H(k)|` divided by its in-band median.
    pub fn normalized_magnitude(&self) -> Vec<T> {
        self.response.iter().map(|h| h.norm() / self.median_magnitude).collect()
    }

    fn interp(&self, ys: &[T], f: T) -> T {
        dsp::interp_linear(&self.frequencies_hz, ys, f)
    }

    pub fn is_in_band(&self, freq_hz: T) -> bool {
        let tx_max = self.tx_psd.iter().fold(T::zero(), |m, &v| m.max(v));
        self.interp(&self.tx_psd, freq_hz) >= tx_max * from_db(T::lit(IN_BAND_DB))
    }

    pub(crate) fn grid(&self, n: usize, sample_rate: T) -> CalibrationGrid<T> {
        let norm = self.normalized_magnitude();
        let ratio: Vec<T> = self
            .unfloored
            .iter()
            .zip(&self.response)
            .map(|(u, h)| *u / h.norm())
            .collect();
        let tx_max = self.tx_psd.iter().fold(T::zero(), |m, &v| m.max(v));
        let band_floor = tx_max * from_db(T::lit(IN_BAND_DB));
        let mut inverse = Vec::with_capacity(n);
        let mut template_scale = Vec::with_capacity(n);
        for k in 0..n {
            let f = dsp::bin_frequency(k, n, sample_rate);
            if self.interp(&self.tx_psd, f) >= band_floor {
                inverse.push(T::one() / self.interp(&norm, f));
                template_scale.push(self.interp(&ratio, f));
            } else {
                inverse.push(T::one());
                template_scale.push(T::one());
            }
        }
        CalibrationGrid {
            inverse,
            template_scale,
        }
    }
}

/// Divides the in-band bins of `spectrum` (natural FFT order at
/// `sample_rate`) by the normalized `H`; out-of-band bins pass unchanged.
pub fn apply_calibration<T: Real>(
    spectrum: &[Complex<T>],
    sample_rate: T,
    cal: &CalibrationProfile<T>,
) -> Vec<Complex<T>> {
    let g = cal.grid(spectrum.len(), sample_rate);
    spectrum
        .iter()
        .zip(&g.inverse)
        .map(|(x, inv)| *x * *inv)
        .collect()
}

/// Calibration from a back-to-back capture `rx` and the transmitted
/// waveform `tx`, using Welch spectra. The noise level is the median receive
/// PSD over bins the transmitter leaves empty.
pub fn calibration_from_captures<T: Real>(
    rx: &BasebandSignal<T>,
    tx: &BasebandSignal<T>,
    segment_len: usize,
) -> Result<CalibrationProfile<T>> {
    if (rx.sample_rate - tx.sample_rate).abs() > T::lit(1e-9) * tx.sample_rate {
        return Err(Error::InvalidParameter(
            "calibration captures differ in sample rate".into(),
        ));
    }
    if rx.len() < segment_len || tx.len() < segment_len {
        return Err(Error::InvalidParameter(format!(
            "calibration captures shorter than one {segment_len}-sample segment"
        )));
    }
    let rxb = rx.to_baseband();
    let txb = tx.to_baseband();
    let pr = dsp::welch_psd(&rxb.samples, segment_len);
    let ps = dsp::welch_psd(&txb.samples, segment_len);
    let fs = tx.sample_rate;
    let freqs: Vec<T> = (0..segment_len)
        .map(|k| dsp::bin_frequency(k, segment_len, fs))
        .collect();
    let ps_max = ps.iter().fold(T::zero(), |m, &v| m.max(v));
    let quiet = ps_max * from_db(T::lit(NOISE_BIN_DB));
    let mut noise: Vec<T> = pr
        .iter()
        .zip(&ps)
        .filter(|(_, &s)| s < quiet)
        .map(|(&r, _)| r)
        .collect();
    noise.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let noise_power = if noise.is_empty() {
        T::zero()
    } else {
        noise[noise.len() / 2]
    };
    build_calibration(&freqs, &pr, &ps, noise_power)
}

/// Mean in-band noise gain of the calibration filter, in dB.
pub fn noise_elevation_db<T: Real>(cal: &CalibrationProfile<T>) -> T {
    let norm = cal.normalized_magnitude();
    let (sum, count) = norm
        .iter()
        .zip(&cal.in_band)
        .filter(|(_, &b)| b)
        .fold((T::zero(), 0usize), |(s, c), (h, _)| (s + T::one() / (*h * *h), c + 1));
    if count == 0 {
        return T::zero();
    }
    to_db(sum / T::from_usize_lossy(count))
}
