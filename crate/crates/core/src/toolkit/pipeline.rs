//! The generate → simulate → analyze chain plus the weather, fit and report
//! products. Every output is a pure function of the configuration and seed.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::capture::{CaptureFile, CaptureKind, CaptureMetadata, LayoutMetadata, SCHEMA_VERSION};
use super::config::RunConfig;
use super::tables::{write_table, Cell, Column, ColumnType, RunInfo, Table};
use super::write_atomic;
use crate::channel_sim::{apply_channel, synth_weather_taps, ImpairmentSet, Scenario, TapSet};
use crate::fitting::{self, Family, FitResult};
use crate::metrics::{
    delay_spread_of, empirical_cdf, k_factor_of, quality_from_snr, ChannelMetrics, DelayWeighting, NoiseKind,
};
use crate::receiver::{calibration_from_captures, FrameReport, MpcProfile, Receiver};
use crate::scalar::to_db;
use crate::waveform::{build_frame, modulate, BasebandSignal};
use crate::weather::{fspl, link_budget_eval, WeatherState, TERM_NAMES};
use crate::{Error, Result};

pub const TX_CAPTURE: &str = "tx.thzcap";
pub const RX_CAPTURE: &str = "rx.thzcap";
pub const B2B_CAPTURE: &str = "b2b.thzcap";

/// Mean SNRs of the campaign (thermal, thermal + system noise) used as the
/// default capacity-table inputs.
pub const CAMPAIGN_MEAN_SNR_DB: [(Scenario, f64, f64); 3] = [
    (Scenario::Clear, 51.30, 31.78),
    (Scenario::Rain, 49.99, 30.47),
    (Scenario::Snow, 37.96, 18.44),
];

fn col(name: &str, kind: ColumnType, unit: &str) -> Column {
    Column::new(name, kind, unit)
}

fn run_info(cfg: &RunConfig) -> RunInfo {
    RunInfo::new(Some(cfg.seed), Some(cfg.scenario.to_string()))
}

/// The shaped sounding frame of `cfg`.
pub fn transmit_signal(cfg: &RunConfig) -> Result<BasebandSignal<f64>> {
    let w = &cfg.waveform;
    modulate(&build_frame(&w.layout()?), &w.shape()?, w.chip_rate_hz(), w.if_frequency_hz)
}

fn transmit_from_metadata(m: &CaptureMetadata) -> Result<BasebandSignal<f64>> {
    let layout = m.layout.to_layout::<f64>()?;
    modulate(&build_frame(&layout), &m.pulse, layout.chip_rate_hz(), m.if_frequency_hz)
}

fn metadata(cfg: &RunConfig, kind: CaptureKind, signal: &BasebandSignal<f64>, frames: usize, stride: usize) -> Result<CaptureMetadata> {
    let layout = cfg.waveform.layout()?;
    Ok(CaptureMetadata {
        schema_version: SCHEMA_VERSION,
        kind,
        sample_rate_hz: signal.sample_rate,
        if_frequency_hz: cfg.waveform.if_frequency_hz,
        chip_duration_ns: cfg.waveform.chip_duration_ns,
        layout: LayoutMetadata::of(&layout),
        pulse: cfg.waveform.shape()?,
        scenario: Some(cfg.scenario),
        seed: cfg.seed,
        frames,
        frame_stride_samples: stride,
        power_reference_dbm: reference_power_dbm(cfg)?,
    })
}

/// Modelled received power of the configured link at the scenario's mean
/// campaign weather; the absolute level of a unit-gain path.
pub fn reference_power_dbm(cfg: &RunConfig) -> Result<f64> {
    let budget = cfg.budget.link_budget()?;
    Ok(link_budget_eval(&budget, &WeatherState::campaign_mean(cfg.scenario))?.received_power_dbm)
}

/// Writes the transmit capture.
pub fn generate(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    let tx = transmit_signal(cfg)?;
    let meta = metadata(cfg, CaptureKind::Transmit, &tx, 1, tx.len())?;
    let path = out_dir.join(TX_CAPTURE);
    CaptureFile::from_signal(meta, &tx).write(&path)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub capture: PathBuf,
    pub taps: PathBuf,
    pub truth: PathBuf,
    pub back_to_back: Option<PathBuf>,
    pub tap_sets: Vec<TapSet<f64>>,
}

/// Per-frame (tap, noise) seeds drawn sequentially from the run seed.
fn frame_seeds(seed: u64, frames: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames).map(|_| (rng.random(), rng.random())).collect()
}

/// Ground-truth K-factor and spreads of a tap set, delays relative to the
/// first tap.
pub fn truth_metrics(taps: &TapSet<f64>) -> Result<(f64, f64, f64)> {
    let d0 = taps.taps()[0].delay_ns;
    let delays: Vec<f64> = taps.taps().iter().map(|t| t.delay_ns - d0).collect();
    let powers: Vec<f64> = taps.taps().iter().map(|t| t.power()).collect();
    let k = k_factor_of(&powers)?.value_db;
    let squared = delay_spread_of(&delays, &powers, DelayWeighting::SquaredPower)?.rms_ns;
    let conventional = delay_spread_of(&delays, &powers, DelayWeighting::Conventional)?.rms_ns;
    Ok((k, squared, conventional))
}

/// Passes `frames` independent channel realisations of the sounding frame
/// through the channel and writes the receive capture, the ground-truth
/// taps and, with a frontend model, a back-to-back calibration capture.
pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulationOutput> {
    let tx = transmit_signal(cfg)?;
    let fs = tx.sample_rate;
    let layout = cfg.waveform.layout()?;
    let guard = layout.body.len() * cfg.waveform.samples_per_chip;
    let stride = tx.len() + guard;
    let imp = cfg.channel.impairments(cfg.seed, fs);
    let fixed = cfg.channel.tap_set()?;
    let seeds = frame_seeds(cfg.seed, cfg.frames);

    let frames: Vec<(TapSet<f64>, Vec<num_complex::Complex<f64>>)> = seeds
        .par_iter()
        .map(|&(tap_seed, noise_seed)| {
            let taps = match &fixed {
                Some(t) => t.clone(),
                None => synth_weather_taps(cfg.scenario, tap_seed),
            };
            let mut out = apply_channel(&tx, &taps, &imp, noise_seed)?.signal.samples;
            out.resize(stride, num_complex::Complex::new(0.0, 0.0));
            Ok((taps, out))
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(stride * cfg.frames);
    for (_, s) in &frames {
        samples.extend_from_slice(s);
    }
    let rx = BasebandSignal { samples, ..tx.clone() };
    let meta = metadata(cfg, CaptureKind::Receive, &tx, cfg.frames, stride)?;
    let capture = out_dir.join(RX_CAPTURE);
    CaptureFile::from_signal(meta, &rx).write(&capture)?;

    let scenario = cfg.scenario.to_string();
    let mut taps_table = Table::new(
        "taps",
        "ground-truth channel taps per frame",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("frame_id", ColumnType::Integer, ""),
            col("tap", ColumnType::Integer, ""),
            col("delay_ns", ColumnType::Float, "ns"),
            col("power_db", ColumnType::Float, "dB"),
            col("gain_re", ColumnType::Float, ""),
            col("gain_im", ColumnType::Float, ""),
        ],
    );
    let mut truth_table = Table::new(
        "truth_metrics",
        "K-factor and RMS delay spreads computed directly from the ground-truth taps",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("frame_id", ColumnType::Integer, ""),
            col("k_factor_db", ColumnType::Float, "dB"),
            col("rms_delay_spread_ns", ColumnType::Float, "ns"),
            col("rms_delay_spread_conventional_ns", ColumnType::Float, "ns"),
        ],
    );
    for (i, (taps, _)) in frames.iter().enumerate() {
        for (k, t) in taps.taps().iter().enumerate() {
            taps_table.push(vec![
                scenario.as_str().into(),
                i.into(),
                k.into(),
                t.delay_ns.into(),
                to_db(t.power()).into(),
                t.gain.re.into(),
                t.gain.im.into(),
            ]);
        }
        let (k, squared, conventional) = truth_metrics(taps)?;
        truth_table.push(vec![
            scenario.as_str().into(),
            i.into(),
            k.into(),
            squared.into(),
            conventional.into(),
        ]);
    }
    let info = run_info(cfg);
    let taps_path = write_table(out_dir, &taps_table, &info)?;
    let truth = write_table(out_dir, &truth_table, &info)?;

    let back_to_back = match &imp.hardware_response {
        Some(hw) => {
            let b2b_imp = ImpairmentSet {
                snr_db: cfg.channel.back_to_back_snr_db,
                hardware_response: Some(hw.clone()),
                ..ImpairmentSet::clean()
            };
            let noise_seed = cfg.seed ^ 0x6232_6263_616c_6962;
            let mut sig = apply_channel(&tx, &TapSet::identity(), &b2b_imp, noise_seed)?.signal;
            sig.samples.truncate(tx.len());
            let meta = metadata(cfg, CaptureKind::BackToBack, &tx, 1, tx.len())?;
            let path = out_dir.join(B2B_CAPTURE);
            CaptureFile::from_signal(meta, &sig).write(&path)?;
            Some(path)
        }
        None => None,
    };

    Ok(SimulationOutput {
        capture,
        taps: taps_path,
        truth,
        back_to_back,
        tap_sets: frames.into_iter().map(|(t, _)| t).collect(),
    })
}

/// A fit of one metric, as serialized into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub scenario: Option<String>,
    pub metric: String,
    #[serde(flatten)]
    pub fit: FitResult<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MetricFits {
    pub records: Vec<FitRecord>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl MetricFits {
    fn extend(&mut self, other: MetricFits) {
        self.records.extend(other.records);
        self.tables.extend(other.tables);
        self.notes.extend(other.notes);
    }
}

fn cdf_table(name: &str, description: &str, unit: &str, points: &[(f64, f64)]) -> Table {
    let mut t = Table::new(
        name,
        description,
        vec![col("value", ColumnType::Float, unit), col("probability", ColumnType::Float, "")],
    );
    for &(x, p) in points {
        t.push(vec![x.into(), p.into()]);
    }
    t
}

fn unit_of(metric: &str) -> &'static str {
    if metric.ends_with("_db") {
        "dB"
    } else if metric.ends_with("_ns") {
        "ns"
    } else {
        ""
    }
}

/// Fits `values` with each family and builds the empirical and fitted CDF
/// tables. Families whose preconditions the data violate are skipped with
/// a note.
pub fn fit_metric(metric: &str, values: &[f64], families: &[Family], cdf_points: usize, scenario: Option<&str>) -> MetricFits {
    let mut out = MetricFits::default();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < values.len() {
        out.notes.push(format!(
            "{metric}: {} non-finite values (LoS-only frames) excluded",
            values.len() - finite.len()
        ));
    }
    if finite.is_empty() {
        out.notes.push(format!("{metric}: no finite values"));
        return out;
    }
    let unit = unit_of(metric);
    if let Ok(ecdf) = empirical_cdf(&finite) {
        out.tables.push(cdf_table(
            &format!("cdf_{metric}"),
            &format!("empirical CDF of {metric}"),
            unit,
            &ecdf,
        ));
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.1 * lo.abs().max(1e-3) };
    for &family in families {
        let fit = match family {
            Family::Rician => {
                let positive: Vec<f64> = finite.iter().copied().filter(|v| *v > 0.0).collect();
                if positive.len() < finite.len() {
                    out.notes.push(format!(
                        "{metric}: {} non-positive values excluded from the Rician fit",
                        finite.len() - positive.len()
                    ));
                }
                fitting::fit_rician(&positive)
            }
            _ => fitting::fit(family, &finite),
        };
        let fit = match fit {
            Ok(f) => f,
            Err(e) => {
                out.notes.push(format!("{metric}: {family} fit skipped: {e}"));
                continue;
            }
        };
        for w in &fit.warnings {
            out.notes.push(format!("{metric}: {family}: {w}"));
        }
        let mut a = lo - pad;
        if family == Family::Rician {
            a = a.max(0.0);
        }
        let b = hi + pad;
        let xs: Vec<f64> = (0..cdf_points)
            .map(|i| a + (b - a) * i as f64 / (cdf_points - 1) as f64)
            .collect();
        if let Ok(ps) = fitting::eval_cdf_many(&fit.params, &xs) {
            let pts: Vec<(f64, f64)> = xs.into_iter().zip(ps).collect();
            out.tables.push(cdf_table(
                &format!("cdf_{metric}_{family}"),
                &format!("fitted {family} CDF of {metric}"),
                unit,
                &pts,
            ));
        }
        out.records.push(FitRecord {
            scenario: scenario.map(String::from),
            metric: metric.into(),
            fit,
        });
    }
    out
}

fn fits_table(records: &[FitRecord]) -> Table {
    let mut t = Table::new(
        "fits",
        "fitted distribution parameters, one row per parameter",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("metric", ColumnType::Text, ""),
            col("family", ColumnType::Text, ""),
            col("parameter", ColumnType::Text, ""),
            col("value", ColumnType::Float, ""),
            col("sample_count", ColumnType::Integer, ""),
            col("ks_statistic", ColumnType::Float, ""),
            col("converged", ColumnType::Bool, ""),
        ],
    );
    for r in records {
        for (name, value) in r.fit.params.named() {
            t.push(vec![
                r.scenario.clone().unwrap_or_default().into(),
                r.metric.as_str().into(),
                r.fit.family().as_str().into(),
                name.into(),
                value.into(),
                r.fit.sample_count.into(),
                r.fit.ks_statistic.into(),
                r.fit.converged.into(),
            ]);
        }
    }
    t
}

/// Writes the fit tables, `fits.csv` and `fits.json`.
fn write_fits(out_dir: &Path, fits: &MetricFits, info: &RunInfo) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for t in &fits.tables {
        files.push(write_table(out_dir, t, info)?);
    }
    files.push(write_table(out_dir, &fits_table(&fits.records), info)?);
    let mut json = serde_json::to_vec_pretty(&fits.records)?;
    json.push(b'\n');
    let path = out_dir.join("fits.json");
    write_atomic(&path, &json)?;
    files.push(path);
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub scenario: Option<Scenario>,
    pub frames_total: usize,
    pub reports: Vec<FrameReport<f64>>,
    pub metrics: Vec<ChannelMetrics<f64>>,
    pub failures: Vec<(u64, String)>,
    pub fits: MetricFits,
    pub calibrated: bool,
    pub files: Vec<PathBuf>,
}

impl AnalysisOutput {
    pub fn profiles(&self) -> impl Iterator<Item = &MpcProfile<f64>> {
        self.reports.iter().map(|r| &r.profile)
    }
}

/// Builds the receiver for a capture, calibrated from the back-to-back
/// capture in the same directory when one exists.
pub fn receiver_for(capture: &CaptureFile, capture_path: &Path, cfg: &RunConfig) -> Result<(Receiver<f64>, bool)> {
    let m = &capture.metadata;
    let layout = m.layout.to_layout::<f64>()?;
    let rcfg = cfg.receiver.receiver_config(layout, m.pulse, m.if_frequency_hz);
    let mut receiver = Receiver::new(rcfg)?;
    let b2b_path = capture_path.parent().unwrap_or(Path::new(".")).join(B2B_CAPTURE);
    let mut calibrated = false;
    if cfg.receiver.calibrate && b2b_path.is_file() && capture_path != b2b_path {
        let b2b = CaptureFile::read(&b2b_path)?;
        if b2b.metadata.kind != CaptureKind::BackToBack {
            return Err(Error::Format(format!("{} is not a back-to-back capture", b2b_path.display())));
        }
        let tx = transmit_from_metadata(&b2b.metadata)?;
        let mut rx = b2b.signal::<f64>();
        rx.samples.truncate(tx.len());
        let cal = calibration_from_captures(&rx, &tx, cfg.receiver.welch_segment)?;
        receiver = receiver.with_calibration(cal);
        calibrated = true;
    }
    Ok((receiver, calibrated))
}

/// Runs receiver → metrics → fitting over every frame of a capture and
/// writes the profile, metric, fit and CDF tables.
pub fn analyze(capture_path: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<AnalysisOutput> {
    let capture = CaptureFile::read(capture_path)?;
    let m = capture.metadata.clone();
    let (receiver, calibrated) = receiver_for(&capture, capture_path, cfg)?;
    let reference = cfg.analysis.power_reference_dbm.unwrap_or(m.power_reference_dbm);
    let noise = cfg.noise.model();
    let weighting = cfg.analysis.delay_weighting;
    let scenario_label = m.scenario.map(|s| s.to_string()).unwrap_or_default();

    let results: Vec<Result<(FrameReport<f64>, ChannelMetrics<f64>)>> = (0..m.frames)
        .into_par_iter()
        .map(|i| {
            let sig = capture.frame::<f64>(i)?;
            let report = receiver.process_frame(&sig, i as u64, reference)?;
            let metrics = ChannelMetrics::from_profile(&report.profile, &noise, weighting)?;
            Ok((report, metrics))
        })
        .collect();
    let mut reports = Vec::new();
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((rep, met)) => {
                reports.push(rep);
                metrics.push(met);
            }
            Err(e) => {
                failures.push((i as u64, e.to_string()));
                first_error.get_or_insert(e);
            }
        }
    }
    if reports.is_empty() {
        return Err(first_error.unwrap_or(Error::NoFrameFound {
            score: 0.0,
            threshold: cfg.receiver.sync_threshold,
        }));
    }

    let sc = scenario_label.as_str();
    let mut frames_table = Table::new(
        "frames",
        "per-frame synchronization and carrier recovery",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("frame_id", ColumnType::Integer, ""),
            col("sync_offset", ColumnType::Integer, "samples"),
            col("sync_score", ColumnType::Float, ""),
            col("cfo_hz", ColumnType::Float, "Hz"),
            col("phase_rad", ColumnType::Float, "rad"),
            col("phase_error_variance", ColumnType::Float, "rad^2"),
            col("components", ColumnType::Integer, ""),
            col("noise_floor_dbm", ColumnType::Float, "dBm"),
        ],
    );
    let mut profiles_table = Table::new(
        "profiles",
        "multipath components per frame, delays relative to the earliest component",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("frame_id", ColumnType::Integer, ""),
            col("component", ColumnType::Integer, ""),
            col("delay_ns", ColumnType::Float, "ns"),
            col("power_dbm", ColumnType::Float, "dBm"),
            col("amplitude_re", ColumnType::Float, ""),
            col("amplitude_im", ColumnType::Float, ""),
        ],
    );
    for rep in &reports {
        let p = &rep.profile;
        frames_table.push(vec![
            sc.into(),
            p.frame_id.into(),
            rep.sync.offset.into(),
            rep.sync.score.into(),
            rep.carrier.freq_offset_hz.into(),
            rep.carrier.phase_offset.into(),
            rep.carrier.phase_error_variance.into(),
            p.len().into(),
            p.noise_floor_dbm.into(),
        ]);
        for (k, c) in p.components.iter().enumerate() {
            profiles_table.push(vec![
                sc.into(),
                p.frame_id.into(),
                k.into(),
                c.delay_ns.into(),
                c.power_dbm.into(),
                c.amplitude.re.into(),
                c.amplitude.im.into(),
            ]);
        }
    }
    let mut metrics_table = Table::new(
        "metrics",
        "per-frame channel metrics",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("frame_id", ColumnType::Integer, ""),
            col("received_power_dbm", ColumnType::Float, "dBm"),
            col("k_factor_db", ColumnType::Float, "dB"),
            col("los_only", ColumnType::Bool, ""),
            col("rms_delay_spread_ns", ColumnType::Float, "ns"),
            col("mean_delay_ns", ColumnType::Float, "ns"),
            col("rms_delay_spread_conventional_ns", ColumnType::Float, "ns"),
            col("snr_db", ColumnType::Float, "dB"),
            col("spectral_efficiency", ColumnType::Float, "bit/s/Hz"),
            col("capacity_bps", ColumnType::Float, "bit/s"),
        ],
    );
    for x in &metrics {
        metrics_table.push(vec![
            sc.into(),
            x.frame_id.into(),
            x.received_power_dbm.into(),
            x.k_factor_db.into(),
            x.los_only.into(),
            x.rms_delay_spread_ns.into(),
            x.mean_delay_ns.into(),
            x.rms_delay_spread_conventional_ns.into(),
            x.snr_db.into(),
            x.spectral_efficiency.into(),
            x.capacity_bps.into(),
        ]);
    }

    let scen = m.scenario.map(|s| s.to_string());
    let mut fits = MetricFits::default();
    let column = |f: fn(&ChannelMetrics<f64>) -> f64| metrics.iter().map(f).collect::<Vec<f64>>();
    let points = cfg.analysis.cdf_points;
    fits.extend(fit_metric("k_factor_db", &column(|x| x.k_factor_db), &[Family::Normal], points, scen.as_deref()));
    let spread_families = [Family::Rician, Family::Stable];
    fits.extend(fit_metric(
        "rms_delay_spread_ns",
        &column(|x| x.rms_delay_spread_ns),
        &spread_families,
        points,
        scen.as_deref(),
    ));
    fits.extend(fit_metric(
        "rms_delay_spread_conventional_ns",
        &column(|x| x.rms_delay_spread_conventional_ns),
        &spread_families,
        points,
        scen.as_deref(),
    ));

    let mut info = RunInfo::new(Some(m.seed), scen.clone());
    info.notes = fits.notes.clone();
    info.notes.push(format!(
        "{} of {} frames processed{}",
        reports.len(),
        m.frames,
        if calibrated { ", calibrated from the back-to-back capture" } else { "" }
    ));
    for (id, e) in &failures {
        info.notes.push(format!("frame {id} failed: {e}"));
    }
    let mut files = vec![
        write_table(out_dir, &frames_table, &info)?,
        write_table(out_dir, &profiles_table, &info)?,
        write_table(out_dir, &metrics_table, &info)?,
    ];
    files.extend(write_fits(out_dir, &fits, &info)?);

    Ok(AnalysisOutput {
        scenario: m.scenario,
        frames_total: m.frames,
        reports,
        metrics,
        failures,
        fits,
        calibrated,
        files,
    })
}

/// Reads a weather time series. Columns: `timestamp_s`, `temperature_c`,
/// `water_vapor_gm3`, `pressure_hpa`, `precipitation_rate_mm_h`,
/// `precipitation_kind` (`none`, `rain` or `snow`).
pub fn read_weather_csv(path: &Path) -> Result<Vec<WeatherState<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<WeatherState<f64>>().enumerate() {
        let state = rec.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1)))?;
        state.validate()?;
        out.push(state);
    }
    if out.is_empty() {
        return Err(Error::Empty("weather time series"));
    }
    Ok(out)
}

/// Per-reading link-budget ledger.
pub fn weather_ledger(cfg: &RunConfig, states: &[WeatherState<f64>]) -> Result<Table> {
    let budget = cfg.budget.link_budget()?;
    let ledgers: Vec<_> = states
        .par_iter()
        .map(|s| link_budget_eval(&budget, s))
        .collect::<Result<_>>()?;
    let mut columns = vec![
        col("timestamp_s", ColumnType::Float, "s"),
        col("precipitation_kind", ColumnType::Text, ""),
        col("precipitation_rate_mm_h", ColumnType::Float, "mm/h"),
        col("temperature_c", ColumnType::Float, "degC"),
        col("water_vapor_gm3", ColumnType::Float, "g/m^3"),
        col("pressure_hpa", ColumnType::Float, "hPa"),
    ];
    for name in TERM_NAMES {
        columns.push(col(&format!("{name}_db"), ColumnType::Float, "dB"));
    }
    columns.push(col("received_power_dbm", ColumnType::Float, "dBm"));
    let mut t = Table::new(
        "ledger",
        "link-budget ledger per weather reading; losses are negative",
        columns,
    );
    for (s, l) in states.iter().zip(&ledgers) {
        let kind = serde_json::to_value(s.precipitation_kind)?;
        let mut row: Vec<Cell> = vec![
            s.timestamp_s.into(),
            kind.as_str().unwrap_or_default().into(),
            s.precipitation_rate_mm_h.into(),
            s.temperature_c.into(),
            s.water_vapor_gm3.into(),
            s.pressure_hpa.into(),
        ];
        row.extend(l.terms.iter().map(|t| Cell::from(t.value_db)));
        row.push(l.received_power_dbm.into());
        t.push(row);
    }
    Ok(t)
}

pub fn weather(cfg: &RunConfig, csv_path: &Path, out_dir: &Path) -> Result<PathBuf> {
    let states = read_weather_csv(csv_path)?;
    let table = weather_ledger(cfg, &states)?;
    write_table(out_dir, &table, &RunInfo::new(None, None))
}

/// Fits a sample file's column and writes the fit and CDF tables.
pub fn fit_samples(
    values: &[f64],
    metric: &str,
    families: &[Family],
    cdf_points: usize,
    out_dir: &Path,
) -> Result<MetricFits> {
    if values.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let fits = fit_metric(metric, values, families, cdf_points, None);
    if fits.records.is_empty() {
        return Err(Error::InvalidParameter(fits.notes.join("; ")));
    }
    let mut info = RunInfo::new(None, None);
    info.notes = fits.notes.clone();
    write_fits(out_dir, &fits, &info)?;
    Ok(fits)
}

/// SNR → spectral efficiency and capacity for each scenario under both
/// noise models. Received powers in the configuration take precedence over
/// SNR inputs, which default to the campaign means.
pub fn capacity_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(
        "capacity",
        "SNR, spectral efficiency and capacity per scenario and noise model",
        vec![
            col("scenario", ColumnType::Text, ""),
            col("noise", ColumnType::Text, ""),
            col("snr_db", ColumnType::Float, "dB"),
            col("spectral_efficiency", ColumnType::Float, "bit/s/Hz"),
            col("capacity_gbps", ColumnType::Float, "Gbit/s"),
        ],
    );
    let bandwidth = cfg.noise.bandwidth_hz;
    let overrides = &cfg.capacity;
    for (scenario, thermal, system) in CAMPAIGN_MEAN_SNR_DB {
        for (kind, label, default) in [
            (NoiseKind::Thermal, "thermal", thermal),
            (NoiseKind::ThermalPlusSystem, "thermal_plus_system", system),
        ] {
            let snr = match overrides.received_power_dbm.get(&scenario) {
                Some(pr) => pr - cfg.noise.with_kind(kind).noise_dbm(),
                None => {
                    let over = match kind {
                        NoiseKind::Thermal => overrides.thermal_snr_db.get(&scenario),
                        NoiseKind::ThermalPlusSystem => overrides.system_snr_db.get(&scenario),
                    };
                    over.copied().unwrap_or(default)
                }
            };
            let q = quality_from_snr(snr, bandwidth);
            t.push(vec![
                scenario.as_str().into(),
                label.into(),
                snr.into(),
                q.spectral_efficiency.into(),
                (q.capacity_bps / 1e9).into(),
            ]);
        }
    }
    Ok(t)
}

/// Frame arithmetic and the fixed link-budget terms of the configuration.
pub fn frame_table(cfg: &RunConfig) -> Result<Table> {
    let layout = cfg.waveform.layout()?;
    let shape = cfg.waveform.shape()?;
    let budget = cfg.budget.link_budget()?;
    let mut t = Table::new(
        "frame",
        "sounding frame arithmetic and fixed link terms",
        vec![
            col("quantity", ColumnType::Text, ""),
            col("value", ColumnType::Float, ""),
            col("unit", ColumnType::Text, ""),
        ],
    );
    let fs = layout.chip_rate_hz() * shape.samples_per_chip as f64;
    let rows: [(&str, f64, &str); 10] = [
        ("header_chips", layout.header.len() as f64, "chips"),
        ("body_chips", layout.body.len() as f64, "chips"),
        ("repetitions", layout.repetitions as f64, ""),
        ("total_chips", layout.total_chips() as f64, "chips"),
        ("frame_duration", layout.frame_duration_ns(), "ns"),
        ("max_unambiguous_delay", layout.max_unambiguous_delay_ns(), "ns"),
        ("frame_rate", layout.frame_rate_hz(), "Hz"),
        ("sample_rate", fs, "Hz"),
        ("fspl", fspl(budget.center_frequency_hz, budget.distance_m)?, "dB"),
        ("eirp", budget.eirp_dbm(), "dBm"),
    ];
    for (q, v, u) in rows {
        t.push(vec![q.into(), v.into(), u.into()]);
    }
    Ok(t)
}
