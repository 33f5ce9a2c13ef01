//! Receiver backend: frame synchronization, frontend calibration, dual-PLL
//! carrier recovery, repetition-averaged sliding correlation and multipath
//! peak extraction.

mod calibration;
mod carrier;
mod correlate;
mod peaks;
mod sync;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{build_frame, modulate, periodic_replica, BasebandSignal, FrameLayout, PulseShape};
use crate::Real;

pub use calibration::{
    apply_calibration, build_calibration, calibration_from_captures, noise_elevation_db,
    CalibrationProfile, DEFAULT_WELCH_SEGMENT, IN_BAND_DB,
};
pub use carrier::{correct_carrier, estimate_carrier, CarrierEstimate, PllConfig};
pub use correlate::{correlate_profile, PowerDelayProfile};
pub use peaks::{detect_peaks, PeakConfig};
pub use sync::{synchronize, SyncResult, DEFAULT_SYNC_THRESHOLD};

/// Paths within this span of the strongest one anchor the correlation windows.
const ALIGN_SPAN_DB: f64 = 30.0;

/// One detected multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcComponent<T> {
    /// Excess delay relative to the earliest component.
    pub delay_ns: T,
    pub power_dbm: T,
    pub amplitude: Complex<T>,
}

impl<T: Real> MpcComponent<T> {
    pub fn power_linear(&self) -> T {
        self.amplitude.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcProfile<T> {
    pub frame_id: u64,
    pub components: Vec<MpcComponent<T>>,
    pub noise_floor_dbm: T,
    pub dynamic_range_db: T,
    /// Power in dBm of a unit-amplitude component.
    pub power_reference_dbm: T,
}

impl<T: Real> MpcProfile<T> {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Linear powers relative to the reference (`|amplitude|²`).
    pub fn powers(&self) -> Vec<T> {
        self.components.iter().map(|c| c.power_linear()).collect()
    }

    pub fn delays_ns(&self) -> Vec<T> {
        self.components.iter().map(|c| c.delay_ns).collect()
    }

    pub fn max_power_dbm(&self) -> Option<T> {
        self.components
            .iter()
            .map(|c| c.power_dbm)
            .fold(None, |m, p| Some(m.map_or(p, |m: T| m.max(p))))
    }

    /// Total received power over all components, in dBm.
    pub fn total_power_dbm(&self) -> Option<T> {
        if self.components.is_empty() {
            return None;
        }
        let lin: T = self.powers().into_iter().sum();
        Some(crate::scalar::to_db(lin) + self.power_reference_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig<T: Real> {
    pub layout: FrameLayout<T>,
    pub shape: PulseShape<T>,
    /// Nominal carrier the capture sits on; removed before processing.
    pub if_frequency: T,
    pub sync_threshold: T,
    pub pll: PllConfig<T>,
    pub peaks: PeakConfig<T>,
}

impl<T: Real> ReceiverConfig<T> {
    pub fn new(layout: FrameLayout<T>, shape: PulseShape<T>) -> Self {
        Self {
            layout,
            shape,
            if_frequency: T::zero(),
            sync_threshold: T::lit(DEFAULT_SYNC_THRESHOLD),
            pll: PllConfig::default(),
            peaks: PeakConfig::default(),
        }
    }

    pub fn chip_rate_hz(&self) -> T {
        self.layout.chip_rate_hz()
    }

    pub fn sample_rate(&self) -> T {
        self.chip_rate_hz() * T::from_usize_lossy(self.shape.samples_per_chip)
    }
}

/// Everything one frame produces on its way through the receiver.
#[derive(Debug, Clone)]
pub struct FrameReport<T: Real> {
    pub sync: SyncResult<T>,
    pub carrier: CarrierEstimate<T>,
    pub pdp: PowerDelayProfile<T>,
    pub profile: MpcProfile<T>,
}

/// Stateless per-frame processing chain with precomputed replicas.
#[derive(Debug, Clone)]
pub struct Receiver<T: Real> {
    pub config: ReceiverConfig<T>,
    header: Vec<Complex<T>>,
    replica: Vec<Complex<T>>,
    boundary: correlate::BoundaryModel<T>,
    calibration: Option<CalibrationProfile<T>>,
}

impl<T: Real> Receiver<T> {
    pub fn new(config: ReceiverConfig<T>) -> Result<Self> {
        if config.layout.header == config.layout.body {
            return Err(Error::InvalidParameter(
                "header and body sequences are identical; frame sync would be ambiguous".into(),
            ));
        }
        let header = modulate(&config.layout.header, &config.shape, config.chip_rate_hz(), T::zero())?;
        let replica = periodic_replica(&config.layout.body, &config.shape);
        let frame = modulate(&build_frame(&config.layout), &config.shape, config.chip_rate_hz(), T::zero())?;
        let body_start = config.layout.header.len() * config.shape.samples_per_chip;
        let boundary = correlate::BoundaryModel::new(&frame.samples, &replica, body_start);
        Ok(Self {
            config,
            header: header.samples,
            replica,
            boundary,
            calibration: None,
        })
    }

    pub fn with_calibration(mut self, cal: CalibrationProfile<T>) -> Self {
        self.calibration = Some(cal);
        self
    }

    pub fn calibration(&self) -> Option<&CalibrationProfile<T>> {
        self.calibration.as_ref()
    }

    pub fn header_replica(&self) -> &[Complex<T>] {
        &self.header
    }

    pub fn body_replica(&self) -> &[Complex<T>] {
        &self.replica
    }

    /// Runs sync → carrier recovery → correlation → peak detection.
    pub fn process_frame(
        &self,
        signal: &BasebandSignal<T>,
        frame_id: u64,
        power_reference_dbm: T,
    ) -> Result<FrameReport<T>> {
        let cfg = &self.config;
        let expected_fs = cfg.sample_rate();
        if ((signal.sample_rate - expected_fs) / expected_fs).abs() > T::lit(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "capture sample rate {} Hz does not match the receiver's {} Hz",
                signal.sample_rate, expected_fs
            )));
        }
        let mut bb = signal.clone();
        if cfg.if_frequency != T::zero() {
            bb.if_frequency = cfg.if_frequency;
            bb = bb.to_baseband();
        }
        let sync = sync::synchronize_with(&bb, &self.header, cfg.sync_threshold)?;
        let carrier = carrier::estimate_with(&bb, &self.replica, &cfg.layout, &cfg.shape, sync.offset, &cfg.pll)?;
        let corrected = correct_carrier(&bb, &carrier, sync.offset);
        let correlate_at = |offset: usize| {
            correlate::correlate_with(
                &corrected,
                &self.replica,
                &cfg.layout,
                &cfg.shape,
                offset,
                self.calibration.as_ref(),
            )
        };
        // First pass locates the paths; the second re-anchors the windows on
        // the earliest strong path and removes the header leakage of the
        // first repetition before the final extraction.
        let first = correlate_at(sync.offset)?;
        let found = peaks::extract(&first, &cfg.peaks)?;
        let (pdp, found) = match found.earliest_strong(ALIGN_SPAN_DB) {
            Some(lead) if (sync.offset as f64 + lead.round()) >= 0.0 => {
                let shift = lead.round();
                let offset = (sync.offset as f64 + shift) as usize;
                let mut pdp = if shift != 0.0 { correlate_at(offset)? } else { first.clone() };
                let n = first.len() as f64;
                let taus: Vec<T> = found
                    .taus
                    .iter()
                    .map(|t| {
                        let w = t.rem_euclid(n);
                        T::lit(if w >= n / 2.0 { w - n } else { w } - shift)
                    })
                    .collect();
                let gains: Vec<Complex<T>> = found
                    .gains
                    .iter()
                    .map(|g| Complex::new(T::lit(g.re), T::lit(g.im)))
                    .collect();
                self.boundary.correct(
                    &mut pdp,
                    &taus,
                    &gains,
                    cfg.layout.body.len() * cfg.shape.samples_per_chip,
                    self.calibration.as_ref(),
                );
                let again = peaks::extract(&pdp, &cfg.peaks)?;
                (pdp, again)
            }
            _ => (first, found),
        };
        let mut profile = found.to_profile(cfg.peaks.dynamic_range_db);
        if let Some(cal) = &self.calibration {
            // the normalized calibration keeps the frontend's median gain;
            // the back-to-back capture measures it
            let g = cal.median_magnitude;
            let g_db = crate::scalar::to_db(g * g);
            for c in profile.components.iter_mut() {
                c.amplitude = c.amplitude / g;
                c.power_dbm -= g_db;
            }
            profile.noise_floor_dbm -= g_db;
        }
        profile.frame_id = frame_id;
        profile.power_reference_dbm = power_reference_dbm;
        for c in profile.components.iter_mut() {
            c.power_dbm += power_reference_dbm;
        }
        profile.noise_floor_dbm += power_reference_dbm;
        Ok(FrameReport {
            sync,
            carrier,
            pdp,
            profile,
        })
    }
}
