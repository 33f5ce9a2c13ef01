//! Tapped-delay-line channel with carrier impairments, a frontend frequency
//! response and AWGN. Used to produce received captures with known truth.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{self, FftPair};
use crate::error::{Error, Result};
use crate::scalar::{from_db, to_db};
use crate::waveform::{rotate, BasebandSignal};
use crate::Real;

/// Measurement scenario of the campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Clear,
    Rain,
    Snow,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Clear, Scenario::Rain, Scenario::Snow];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Clear => "clear",
            Scenario::Rain => "rain",
            Scenario::Snow => "snow",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clear" => Ok(Scenario::Clear),
            "rain" => Ok(Scenario::Rain),
            "snow" => Ok(Scenario::Snow),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T: Real> {
    pub delay_ns: T,
    pub gain: Complex<T>,
}

impl<T: Real> Tap<T> {
    pub fn new(delay_ns: T, gain: Complex<T>) -> Self {
        Self { delay_ns, gain }
    }

    pub fn power(&self) -> T {
        self.gain.norm_sqr()
    }
}

pub const DEFAULT_MAX_DELAY_NS: f64 = 409.5;

/// Ground-truth channel taps with strictly increasing delays.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet<T: Real> {
    taps: Vec<Tap<T>>,
    pub max_delay_ns: T,
}

impl<T: Real> TapSet<T> {
    pub fn new(taps: Vec<Tap<T>>) -> Result<Self> {
        Self::with_max_delay(taps, T::lit(DEFAULT_MAX_DELAY_NS))
    }

    pub fn with_max_delay(taps: Vec<Tap<T>>, max_delay_ns: T) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Empty("tap set"));
        }
        for t in &taps {
            if !(t.delay_ns >= T::zero()) || !t.delay_ns.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "tap delay {} ns must be finite and non-negative",
                    t.delay_ns
                )));
            }
            if !(t.gain.re.is_finite() && t.gain.im.is_finite()) {
                return Err(Error::InvalidParameter("tap gain must be finite".into()));
            }
        }
        if taps.windows(2).any(|w| w[1].delay_ns <= w[0].delay_ns) {
            return Err(Error::InvalidParameter(
                "tap delays must be strictly increasing".into(),
            ));
        }
        Ok(Self { taps, max_delay_ns })
    }

    /// Unit-gain tap at zero delay.
    pub fn identity() -> Self {
        Self::new(vec![Tap::new(T::zero(), Complex::new(T::one(), T::zero()))])
            .expect("single tap is valid")
    }

    pub fn taps(&self) -> &[Tap<T>] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn total_power(&self) -> T {
        self.taps.iter().map(Tap::power).sum()
    }

    pub fn last_delay_ns(&self) -> T {
        self.taps.last().map(|t| t.delay_ns).unwrap_or_else(T::zero)
    }

    /// True when some tap lies beyond the unambiguous delay window.
    pub fn exceeds_max_delay(&self) -> bool {
        self.last_delay_ns() > self.max_delay_ns
    }
}

/// Frontend response as a complex gain over frequencies relative to the
/// carrier, linearly interpolated and held constant beyond the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareResponse<T: Real> {
    pub frequencies_hz: Vec<T>,
    pub gain: Vec<Complex<T>>,
}

impl<T: Real> HardwareResponse<T> {
    pub fn new(frequencies_hz: Vec<T>, gain: Vec<Complex<T>>) -> Result<Self> {
        if frequencies_hz.len() != gain.len() {
            return Err(Error::GridMismatch(frequencies_hz.len(), gain.len()));
        }
        if frequencies_hz.len() < 2 {
            return Err(Error::InvalidParameter(
                "hardware response needs at least two points".into(),
            ));
        }
        if frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "hardware response grid must be strictly increasing".into(),
            ));
        }
        if gain.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
            return Err(Error::InvalidParameter(
                "hardware response magnitudes must be finite".into(),
            ));
        }
        Ok(Self {
            frequencies_hz,
            gain,
        })
    }

    /// Real, non-negative gain curve from a dB profile.
    pub fn from_db_curve(frequencies_hz: Vec<T>, gain_db: &[T]) -> Result<Self> {
        let gain = gain_db
            .iter()
            .map(|&g| Complex::new(from_db(g).sqrt(), T::zero()))
            .collect();
        Self::new(frequencies_hz, gain)
    }

    /// Smooth seeded ripple of at most `ripple_db` over `±band_edge_hz` plus a
    /// quartic roll-off reaching `−edge_rolloff_db` at the band edge.
    ///
    /// The grid spans `±span_hz` so the curve covers the whole sampled band.
    pub fn ripple(
        seed: u64,
        span_hz: T,
        band_edge_hz: T,
        ripple_db: T,
        edge_rolloff_db: T,
    ) -> Result<Self> {
        if !(span_hz > T::zero() && band_edge_hz > T::zero()) {
            return Err(Error::InvalidParameter("ripple band must be > 0".into()));
        }
        const POINTS: usize = 513;
        const HARMONICS: usize = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps: Vec<(f64, f64, f64)> = (0..HARMONICS)
            .map(|i| {
                // cycles across the occupied band, amplitude, phase
                let cycles = 0.6 + 0.7 * i as f64 + rng.random::<f64>() * 0.5;
                let amp = rng.random::<f64>() * 0.7 + 0.3;
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                (cycles, amp, phase)
            })
            .collect();
        let span = span_hz.as_f64();
        let edge = band_edge_hz.as_f64();
        let freqs: Vec<f64> = (0..POINTS)
            .map(|i| -span + 2.0 * span * i as f64 / (POINTS - 1) as f64)
            .collect();
        let raw: Vec<f64> = freqs
            .iter()
            .map(|&f| {
                let x = (f / edge).clamp(-1.0, 1.0);
                comps
                    .iter()
                    .map(|&(c, a, p)| a * (std::f64::consts::PI * c * x + p).sin())
                    .sum()
            })
            .collect();
        let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = ripple_db.as_f64() / peak;
        let roll = edge_rolloff_db.as_f64();
        let db: Vec<T> = freqs
            .iter()
            .zip(&raw)
            .map(|(&f, &r)| {
                let x = (f / edge).abs();
                // keep the roll-off from running away far outside the band
                let rolloff = (roll * x.powi(4)).min(3.0 * roll);
                T::lit(r * scale - rolloff)
            })
            .collect();
        Self::from_db_curve(freqs.into_iter().map(T::lit).collect(), &db)
    }

    /// Default frontend profile: ±3 dB ripple and a 35 dB edge roll-off
    /// over a 6.25 GHz half band.
    pub fn default_profile(seed: u64, sample_rate: T) -> Self {
        Self::ripple(
            seed,
            sample_rate / T::lit(2.0),
            T::lit(6.25e9),
            T::lit(3.0),
            T::lit(35.0),
        )
        .expect("default profile parameters are valid")
    }

    pub fn at(&self, freq_hz: T) -> Complex<T> {
        let xs = &self.frequencies_hz;
        let n = xs.len();
        if freq_hz <= xs[0] {
            return self.gain[0];
        }
        if freq_hz >= xs[n - 1] {
            return self.gain[n - 1];
        }
        let hi = xs.partition_point(|v| *v <= freq_hz).min(n - 1);
        let lo = hi - 1;
        let t = (freq_hz - xs[lo]) / (xs[hi] - xs[lo]);
        self.gain[lo] + (self.gain[hi] - self.gain[lo]) * t
    }

    pub fn magnitude_db(&self, freq_hz: T) -> T {
        to_db(self.at(freq_hz).norm_sqr())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentSet<T: Real> {
    pub cfo_hz: T,
    pub phase_offset: T,
    /// Relative to the received signal power; `+∞` disables noise.
    pub snr_db: T,
    pub hardware_response: Option<HardwareResponse<T>>,
}

impl<T: Real> Default for ImpairmentSet<T> {
    fn default() -> Self {
        Self::clean()
    }
}

impl<T: Real> ImpairmentSet<T> {
    pub fn clean() -> Self {
        Self {
            cfo_hz: T::zero(),
            phase_offset: T::zero(),
            snr_db: T::infinity(),
            hardware_response: None,
        }
    }

    pub fn with_snr(snr_db: T) -> Self {
        Self {
            snr_db,
            ..Self::clean()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelOutput<T: Real> {
    pub signal: BasebandSignal<T>,
    /// A tap lies beyond the unambiguous delay; the measured profile aliases.
    pub aliased: bool,
    /// Complex noise variance actually added (0 when noiseless).
    pub noise_variance: T,
}

/// Passes `signal` through `taps`, the hardware response, the carrier offset
/// and AWGN, in that order.
///
/// The output is `ceil(max delay)` samples longer than the input. SNR refers
/// to the mean power over the input's duration after the channel gains.
pub fn apply_channel<T: Real>(
    signal: &BasebandSignal<T>,
    taps: &TapSet<T>,
    imp: &ImpairmentSet<T>,
    noise_seed: u64,
) -> Result<ChannelOutput<T>> {
    if taps.is_empty() {
        return Err(Error::Empty("tap set"));
    }
    if signal.is_empty() {
        return Err(Error::Empty("signal"));
    }
    let fs = signal.sample_rate;
    let to_samples = fs / T::lit(1e9);
    let delays: Vec<T> = taps.taps().iter().map(|t| t.delay_ns * to_samples).collect();
    let max_delay = delays.iter().fold(T::zero(), |m, &d| m.max(d));
    let out_len = signal.len() + max_delay.ceil().to_usize().unwrap_or(0);

    let integer = delays
        .iter()
        .all(|d| (*d - d.round()).abs() < T::lit(1e-9));
    let mut y = if integer && imp.hardware_response.is_none() {
        shift_and_scale(&signal.samples, taps, &delays, out_len)
    } else {
        spectral_channel(signal, taps, &delays, imp.hardware_response.as_ref(), out_len)
    };

    let mut out = BasebandSignal {
        samples: Vec::new(),
        sample_rate: fs,
        if_frequency: signal.if_frequency,
        origin_time: signal.origin_time,
    };

    if imp.phase_offset != T::zero() {
        let r = Complex::from_polar(T::one(), imp.phase_offset);
        for v in y.iter_mut() {
            *v = *v * r;
        }
    }
    rotate(&mut y, imp.cfo_hz, fs, signal.origin_time);

    let mut noise_variance = T::zero();
    if imp.snr_db.is_finite() {
        let p_sig: T = y.iter().map(|v| v.norm_sqr()).sum::<T>() / T::from_usize_lossy(signal.len());
        noise_variance = p_sig / from_db(imp.snr_db);
        add_awgn(&mut y, noise_variance, noise_seed);
    }
    out.samples = y;
    Ok(ChannelOutput {
        signal: out,
        aliased: taps.exceeds_max_delay(),
        noise_variance,
    })
}

fn shift_and_scale<T: Real>(
    x: &[Complex<T>],
    taps: &TapSet<T>,
    delays: &[T],
    out_len: usize,
) -> Vec<Complex<T>> {
    let mut y = vec![Complex::new(T::zero(), T::zero()); out_len];
    for (tap, d) in taps.taps().iter().zip(delays) {
        let shift = d.round().to_usize().unwrap_or(0);
        for (i, v) in x.iter().enumerate() {
            y[i + shift] += *v * tap.gain;
        }
    }
    y
}

/// Band-limited fractional delays and the frontend response applied on a
/// zero-padded FFT grid.
fn spectral_channel<T: Real>(
    signal: &BasebandSignal<T>,
    taps: &TapSet<T>,
    delays: &[T],
    hw: Option<&HardwareResponse<T>>,
    out_len: usize,
) -> Vec<Complex<T>> {
    // guard against wrap-around of the interpolation tails
    let n = dsp::next_fast_len(out_len + 64);
    let plan = FftPair::new(n);
    let mut buf = signal.samples.clone();
    buf.resize(n, Complex::new(T::zero(), T::zero()));
    plan.forward(&mut buf);
    let fs = signal.sample_rate;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = dsp::bin_frequency(k, n, fs);
        // normalized frequency in cycles per sample
        let nu = dsp::bin_frequency(k, n, T::one());
        let mut h = Complex::new(T::zero(), T::zero());
        for (tap, d) in taps.taps().iter().zip(delays) {
            h += tap.gain * Complex::from_polar(T::one(), -T::TAU() * nu * *d);
        }
        if let Some(hw) = hw {
            h = h * hw.at(f - signal.if_frequency);
        }
        // a fractional delay is ambiguous at the Nyquist bin of an even transform
        if 2 * k == n {
            h = Complex::new(T::zero(), T::zero());
        }
        *v = *v * h;
    }
    plan.inverse(&mut buf);
    buf.truncate(out_len);
    buf
}

/// Adds circular complex Gaussian noise of total variance `variance`.
pub fn add_awgn<T: Real>(x: &mut [Complex<T>], variance: T, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (variance / T::lit(2.0)).sqrt();
    for v in x.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex::new(T::lit(re), T::lit(im)) * sd;
    }
}

/// Complex white Gaussian noise of total variance `variance`.
pub fn white_noise<T: Real>(len: usize, variance: T, seed: u64) -> Vec<Complex<T>> {
    let mut x = vec![Complex::new(T::zero(), T::zero()); len];
    add_awgn(&mut x, variance, seed);
    x
}

/// Statistics the synthetic taps of a scenario are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioStats {
    pub k_mean_db: f64,
    pub k_variance_db2: f64,
    /// Share of NLoS power carried by the reflected cluster near 20 ns.
    pub cluster_share: f64,
    pub diffuse_taps: usize,
    pub diffuse_max_delay_ns: f64,
}

impl ScenarioStats {
    pub fn of(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Clear => Self {
                k_mean_db: 35.2,
                k_variance_db2: 0.25,
                cluster_share: 0.65,
                diffuse_taps: 3,
                diffuse_max_delay_ns: 4.0,
            },
            Scenario::Rain => Self {
                k_mean_db: 33.5,
                k_variance_db2: 0.19,
                cluster_share: 0.3,
                diffuse_taps: 4,
                diffuse_max_delay_ns: 6.0,
            },
            Scenario::Snow => Self {
                k_mean_db: 29.8,
                k_variance_db2: 0.22,
                cluster_share: 0.1,
                diffuse_taps: 6,
                diffuse_max_delay_ns: 18.7,
            },
        }
    }
}

const CLUSTER_TAPS: usize = 3;
const MIN_SPACING_NS: f64 = 0.2;

/// Draws a synthetic campus-link channel for `scenario`.
///
/// The LoS tap has unit gain at 0 ns. The total NLoS power is set by a
/// K-factor drawn from the scenario's normal distribution and split between a
/// three-tap reflected cluster near 20 ns and diffuse scatter close to the LoS.
pub fn synth_weather_taps<T: Real>(scenario: Scenario, rng_seed: u64) -> TapSet<T> {
    let stats = ScenarioStats::of(scenario);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let k_db = Normal::new(stats.k_mean_db, stats.k_variance_db2.sqrt())
        .expect("finite scenario variance")
        .sample(&mut rng);
    let nlos = 10f64.powf(-k_db / 10.0);

    let mut base = 19.6 + rng.random::<f64>() * 0.3;
    let mut cluster = Vec::with_capacity(CLUSTER_TAPS);
    for _ in 0..CLUSTER_TAPS {
        cluster.push(base);
        base += 0.25 + rng.random::<f64>() * 0.25;
    }
    let mut diffuse: Vec<f64> = Vec::with_capacity(stats.diffuse_taps);
    while diffuse.len() < stats.diffuse_taps {
        let d = 0.3 + rng.random::<f64>() * (stats.diffuse_max_delay_ns - 0.3);
        let clear_of = |v: &f64| (v - d).abs() >= MIN_SPACING_NS;
        if diffuse.iter().all(clear_of) && cluster.iter().all(clear_of) {
            diffuse.push(d);
        }
    }

    let weights = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let cw = weights(&mut rng, CLUSTER_TAPS);
    let dw = weights(&mut rng, stats.diffuse_taps);

    let mut taps = vec![(0.0, 1.0, 0.0)];
    for (d, w) in cluster.iter().zip(&cw) {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        taps.push((*d, nlos * stats.cluster_share * w, phase));
    }
    for (d, w) in diffuse.iter().zip(&dw) {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        taps.push((*d, nlos * (1.0 - stats.cluster_share) * w, phase));
    }
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let taps = taps
        .into_iter()
        .map(|(d, p, ph)| Tap::new(T::lit(d), Complex::from_polar(T::lit(p.sqrt()), T::lit(ph))))
        .collect();
    TapSet::new(taps).expect("synthetic taps are ordered and finite")
}
