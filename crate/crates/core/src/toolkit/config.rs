//! Run configuration, loaded from TOML. Unknown keys are rejected and every
//! section is optional.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel_sim::{HardwareResponse, ImpairmentSet, Scenario, Tap, TapSet};
use crate::metrics::{DelayWeighting, NoiseKind, NoiseModel, DEFAULT_BANDWIDTH_HZ, DEFAULT_TEMPERATURE_K, SYSTEM_NOISE_FLOOR_DBM};
use crate::receiver::{PeakConfig, ReceiverConfig, DEFAULT_SYNC_THRESHOLD};
use crate::waveform::{
    FrameLayout, PulseShape, DEFAULT_BODY_DEGREE, DEFAULT_CHIP_DURATION_NS, DEFAULT_HEADER_DEGREE, DEFAULT_REPETITIONS,
};
use crate::weather::{LinkBudget, SnowModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub frames: usize,
    pub out_dir: PathBuf,
    pub waveform: WaveformConfig,
    pub channel: ChannelConfig,
    pub receiver: ReceiverSettings,
    pub noise: NoiseConfig,
    pub budget: BudgetConfig,
    pub weather: WeatherConfig,
    pub analysis: AnalysisConfig,
    pub capacity: CapacityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: Scenario::Clear,
            frames: 1,
            out_dir: PathBuf::from("out"),
            waveform: WaveformConfig::default(),
            channel: ChannelConfig::default(),
            receiver: ReceiverSettings::default(),
            noise: NoiseConfig::default(),
            budget: BudgetConfig::default(),
            weather: WeatherConfig::default(),
            analysis: AnalysisConfig::default(),
            capacity: CapacityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub header_degree: u32,
    pub body_degree: u32,
    pub repetitions: usize,
    pub chip_duration_ns: f64,
    pub rolloff: f64,
    pub span_chips: usize,
    pub samples_per_chip: usize,
    pub if_frequency_hz: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        let shape = PulseShape::<f64>::default();
        Self {
            header_degree: DEFAULT_HEADER_DEGREE,
            body_degree: DEFAULT_BODY_DEGREE,
            repetitions: DEFAULT_REPETITIONS,
            chip_duration_ns: DEFAULT_CHIP_DURATION_NS,
            rolloff: shape.rolloff,
            span_chips: shape.span_chips,
            samples_per_chip: shape.samples_per_chip,
            if_frequency_hz: 0.0,
        }
    }
}

impl WaveformConfig {
    pub fn layout(&self) -> Result<FrameLayout<f64>> {
        FrameLayout::new(self.header_degree, self.body_degree, self.repetitions, self.chip_duration_ns)
    }

    pub fn shape(&self) -> Result<PulseShape<f64>> {
        let shape = PulseShape {
            rolloff: self.rolloff,
            span_chips: self.span_chips,
            samples_per_chip: self.samples_per_chip,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn chip_rate_hz(&self) -> f64 {
        1e9 / self.chip_duration_ns
    }
}

/// One explicit channel tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapConfig {
    pub delay_ns: f64,
    pub power_db: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Explicit taps; when empty, taps are drawn per frame for the scenario.
    pub taps: Vec<TapConfig>,
    /// `inf` disables noise.
    pub snr_db: f64,
    pub cfo_hz: f64,
    pub phase_offset_rad: f64,
    /// Apply the default frontend frequency response.
    pub hardware: bool,
    /// Seed of the frontend ripple; defaults to the run seed.
    pub hardware_seed: Option<u64>,
    pub back_to_back_snr_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            taps: Vec::new(),
            snr_db: 30.0,
            cfo_hz: 0.0,
            phase_offset_rad: 0.0,
            hardware: true,
            hardware_seed: None,
            back_to_back_snr_db: 40.0,
        }
    }
}

impl ChannelConfig {
    pub fn tap_set(&self) -> Result<Option<TapSet<f64>>> {
        if self.taps.is_empty() {
            return Ok(None);
        }
        let taps = self
            .taps
            .iter()
            .map(|t| Tap::new(t.delay_ns, Complex::from_polar(10f64.powf(t.power_db / 20.0), t.phase_rad)))
            .collect();
        TapSet::new(taps).map(Some)
    }

    pub fn hardware_response(&self, run_seed: u64, sample_rate: f64) -> Option<HardwareResponse<f64>> {
        self.hardware
            .then(|| HardwareResponse::default_profile(self.hardware_seed.unwrap_or(run_seed), sample_rate))
    }

    pub fn impairments(&self, run_seed: u64, sample_rate: f64) -> ImpairmentSet<f64> {
        ImpairmentSet {
            cfo_hz: self.cfo_hz,
            phase_offset: self.phase_offset_rad,
            snr_db: self.snr_db,
            hardware_response: self.hardware_response(run_seed, sample_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSettings {
    pub dynamic_range_db: f64,
    pub resolution_ns: f64,
    pub sync_threshold: f64,
    /// Use the back-to-back capture next to the input, when present.
    pub calibrate: bool,
    pub welch_segment: usize,
}

impl Default for ReceiverSettings {
    fn default() -> Self {
        let peaks = PeakConfig::<f64>::default();
        Self {
            dynamic_range_db: peaks.dynamic_range_db,
            resolution_ns: peaks.resolution_ns,
            sync_threshold: DEFAULT_SYNC_THRESHOLD,
            calibrate: true,
            welch_segment: crate::receiver::DEFAULT_WELCH_SEGMENT,
        }
    }
}

impl ReceiverSettings {
    pub fn receiver_config(&self, layout: FrameLayout<f64>, shape: PulseShape<f64>, if_hz: f64) -> ReceiverConfig<f64> {
        let mut cfg = ReceiverConfig::new(layout, shape);
        cfg.if_frequency = if_hz;
        cfg.sync_threshold = self.sync_threshold;
        cfg.peaks = PeakConfig::new(self.dynamic_range_db, self.resolution_ns);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    pub system_noise_floor_dbm: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::ThermalPlusSystem,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            temperature_k: DEFAULT_TEMPERATURE_K,
            system_noise_floor_dbm: SYSTEM_NOISE_FLOOR_DBM,
        }
    }
}

impl NoiseConfig {
    pub fn model(&self) -> NoiseModel<f64> {
        NoiseModel {
            kind: self.kind,
            bandwidth_hz: self.bandwidth_hz,
            temperature_k: self.temperature_k,
            system_noise_floor_dbm: self.system_noise_floor_dbm,
        }
    }

    pub fn with_kind(&self, kind: NoiseKind) -> NoiseModel<f64> {
        NoiseModel { kind, ..self.model() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub hw_gain_db: f64,
    pub hw_loss_db: f64,
    pub distance_m: f64,
    pub center_frequency_hz: f64,
    pub snow_wetness: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        let b = LinkBudget::<f64>::default();
        Self {
            tx_power_dbm: b.tx_power_dbm,
            tx_gain_dbi: b.tx_gain_dbi,
            rx_gain_dbi: b.rx_gain_dbi,
            hw_gain_db: b.hw_gain_db,
            hw_loss_db: b.hw_loss_db,
            distance_m: b.distance_m,
            center_frequency_hz: b.center_frequency_hz,
            snow_wetness: b.snow.wetness,
        }
    }
}

impl BudgetConfig {
    pub fn link_budget(&self) -> Result<LinkBudget<f64>> {
        let budget = LinkBudget {
            tx_power_dbm: self.tx_power_dbm,
            tx_gain_dbi: self.tx_gain_dbi,
            rx_gain_dbi: self.rx_gain_dbi,
            hw_gain_db: self.hw_gain_db,
            hw_loss_db: self.hw_loss_db,
            distance_m: self.distance_m,
            center_frequency_hz: self.center_frequency_hz,
            snow: SnowModelParams {
                wetness: self.snow_wetness,
                link_length_m: self.distance_m,
                ..SnowModelParams::default()
            },
        };
        budget.validate()?;
        budget.snow.validate()?;
        Ok(budget)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherConfig {
    /// Weather time series (relative paths resolve against the config file).
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub delay_weighting: DelayWeighting,
    /// Overrides the power reference stored in the capture.
    pub power_reference_dbm: Option<f64>,
    /// Points of each fitted CDF table.
    pub cdf_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            delay_weighting: DelayWeighting::SquaredPower,
            power_reference_dbm: None,
            cdf_points: 200,
        }
    }
}

/// Inputs of the capacity table: either SNRs directly or received powers
/// that are run through both noise models.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    pub received_power_dbm: BTreeMap<Scenario, f64>,
    pub thermal_snr_db: BTreeMap<Scenario, f64>,
    pub system_snr_db: BTreeMap<Scenario, f64>,
}

impl RunConfig {
    /// Parses a TOML document. Errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` and resolves relative input paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(csv) = &cfg.weather.csv {
            if csv.is_relative() {
                cfg.weather.csv = Some(base.join(csv));
            }
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn check_paths(&self) -> Result<()> {
        if let Some(csv) = &self.weather.csv {
            if !csv.is_file() {
                return Err(Error::Config(format!("weather.csv: {} not found", csv.display())));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let layout = self.waveform.layout().map_err(cfg_err)?;
        if layout.header == layout.body {
            return Err(Error::Config(
                "waveform: header and body must be distinct sequences (use different degrees)".into(),
            ));
        }
        let shape = self.waveform.shape().map_err(cfg_err)?;
        if shape.samples_per_chip < 2 {
            return Err(Error::Config("waveform.samples_per_chip must be at least 2".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        self.channel.tap_set().map_err(cfg_err)?;
        if self.channel.snr_db.is_nan() || self.channel.back_to_back_snr_db.is_nan() {
            return Err(Error::Config("channel SNR must be a number".into()));
        }
        self.noise.model().validate().map_err(cfg_err)?;
        self.budget.link_budget().map_err(cfg_err)?;
        if self.receiver.welch_segment < 16 || !self.receiver.welch_segment.is_power_of_two() {
            return Err(Error::Config("receiver.welch_segment must be a power of two ≥ 16".into()));
        }
        if self.analysis.cdf_points < 2 {
            return Err(Error::Config("analysis.cdf_points must be at least 2".into()));
        }
        Ok(())
    }
}
