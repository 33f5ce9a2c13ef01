//! Channel characterization metrics computed from multipath profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::MpcProfile;
use crate::scalar::{from_db, to_db};
use crate::Real;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const DEFAULT_TEMPERATURE_K: f64 = 290.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 20e9;
/// Measured system noise with no transmission reaching the receiver.
pub const SYSTEM_NOISE_FLOOR_DBM: f64 = -51.3;

/// Rician K-factor. A profile with a single component has no scattered
/// power; its K is `+∞` with `los_only` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KFactor<T> {
    pub value_db: T,
    pub los_only: bool,
}

/// `10·log10(P_max / Σ other powers)` over linear powers; the strongest
/// component is taken as the LoS path.
pub fn k_factor_of<T: Real>(powers: &[T]) -> Result<KFactor<T>> {
    if powers.is_empty() {
        return Err(Error::Empty("component powers"));
    }
    if powers.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidParameter("component powers must be finite and ≥ 0".into()));
    }
    let (imax, pmax) = powers
        .iter()
        .enumerate()
        .fold((0, powers[0]), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
    let rest: T = powers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(_, &p)| p)
        .sum();
    if rest <= T::zero() {
        return Ok(KFactor {
            value_db: T::infinity(),
            los_only: true,
        });
    }
    Ok(KFactor {
        value_db: to_db(pmax / rest),
        los_only: false,
    })
}

pub fn k_factor<T: Real>(profile: &MpcProfile<T>) -> Result<KFactor<T>> {
    k_factor_of(&profile.powers())
}

/// Power weighting of the RMS delay spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayWeighting {
    /// Squared powers in the spread, plain powers in the mean delay.
    #[default]
    SquaredPower,
    /// Plain powers in both.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpread<T> {
    pub rms_ns: T,
    pub mean_ns: T,
}

/// Mean delay `Σd·p/Σp` and RMS spread around it.
pub fn delay_spread_of<T: Real>(
    delays_ns: &[T],
    powers: &[T],
    weighting: DelayWeighting,
) -> Result<DelaySpread<T>> {
    if delays_ns.len() != powers.len() {
        return Err(Error::GridMismatch(delays_ns.len(), powers.len()));
    }
    if powers.is_empty() {
        return Err(Error::Empty("component powers"));
    }
    if powers.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidParameter("component powers must be finite and ≥ 0".into()));
    }
    let psum: T = powers.iter().copied().sum();
    if psum <= T::zero() {
        return Err(Error::InvalidParameter("total component power is zero".into()));
    }
    if powers.len() == 1 {
        return Ok(DelaySpread {
            rms_ns: T::zero(),
            mean_ns: delays_ns[0],
        });
    }
    let mean = delays_ns.iter().zip(powers).map(|(d, p)| *d * *p).sum::<T>() / psum;
    let w: Vec<T> = match weighting {
        DelayWeighting::SquaredPower => powers.iter().map(|p| *p * *p).collect(),
        DelayWeighting::Conventional => powers.to_vec(),
    };
    let wsum: T = w.iter().copied().sum();
    let var = delays_ns
        .iter()
        .zip(&w)
        .map(|(d, wi)| (*d - mean) * (*d - mean) * *wi)
        .sum::<T>()
        / wsum;
    Ok(DelaySpread {
        rms_ns: var.max(T::zero()).sqrt(),
        mean_ns: mean,
    })
}

pub fn delay_spread<T: Real>(profile: &MpcProfile<T>, weighting: DelayWeighting) -> Result<DelaySpread<T>> {
    delay_spread_of(&profile.delays_ns(), &profile.powers(), weighting)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Thermal,
    ThermalPlusSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub kind: NoiseKind,
    pub bandwidth_hz: T,
    pub temperature_k: T,
    pub system_noise_floor_dbm: T,
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self {
            kind: NoiseKind::ThermalPlusSystem,
            bandwidth_hz: T::lit(DEFAULT_BANDWIDTH_HZ),
            temperature_k: T::lit(DEFAULT_TEMPERATURE_K),
            system_noise_floor_dbm: T::lit(SYSTEM_NOISE_FLOOR_DBM),
        }
    }
}

impl<T: Real> NoiseModel<T> {
    pub fn thermal(bandwidth_hz: T) -> Self {
        Self {
            kind: NoiseKind::Thermal,
            bandwidth_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > T::zero()) || !self.bandwidth_hz.is_finite() {
            return Err(Error::InvalidParameter("noise bandwidth must be > 0".into()));
        }
        if !(self.temperature_k > T::zero()) || !self.temperature_k.is_finite() {
            return Err(Error::InvalidParameter("noise temperature must be > 0".into()));
        }
        Ok(())
    }

    /// `kTB` in dBm.
    pub fn thermal_dbm(&self) -> T {
        to_db(T::lit(BOLTZMANN) * self.temperature_k * self.bandwidth_hz) + T::lit(30.0)
    }

    /// Total noise power in dBm.
    pub fn noise_dbm(&self) -> T {
        let thermal = self.thermal_dbm();
        match self.kind {
            NoiseKind::Thermal => thermal,
            NoiseKind::ThermalPlusSystem => to_db(from_db(thermal) + from_db(self.system_noise_floor_dbm)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkQuality<T> {
    pub snr_db: T,
    /// bit/s/Hz.
    pub spectral_efficiency: T,
    /// bit/s.
    pub capacity_bps: T,
}

/// Shannon quality of a link: the SNR is given, noise bandwidth sets capacity.
pub fn quality_from_snr<T: Real>(snr_db: T, bandwidth_hz: T) -> LinkQuality<T> {
    let se = (T::one() + from_db(snr_db)).log2();
    LinkQuality {
        snr_db,
        spectral_efficiency: se,
        capacity_bps: se * bandwidth_hz,
    }
}

pub fn snr_se_capacity<T: Real>(received_power_dbm: T, noise: &NoiseModel<T>) -> Result<LinkQuality<T>> {
    noise.validate()?;
    Ok(quality_from_snr(received_power_dbm - noise.noise_dbm(), noise.bandwidth_hz))
}

/// Step CDF: the i-th smallest of n samples maps to i/n.
pub fn empirical_cdf<T: Real>(values: &[T]) -> Result<Vec<(T, T)>> {
    if values.is_empty() {
        return Err(Error::Empty("CDF samples"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("CDF samples contain NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = T::from_usize_lossy(v.len());
    Ok(v
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, T::from_usize_lossy(i + 1) / n))
        .collect())
}

/// Per-frame summary metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics<T> {
    pub frame_id: u64,
    pub received_power_dbm: T,
    pub k_factor_db: T,
    pub los_only: bool,
    pub rms_delay_spread_ns: T,
    pub mean_delay_ns: T,
    /// Spread with plain power weights, reported alongside the configured one.
    pub rms_delay_spread_conventional_ns: T,
    pub snr_db: T,
    pub spectral_efficiency: T,
    pub capacity_bps: T,
}

impl<T: Real> ChannelMetrics<T> {
    pub fn from_profile(
        profile: &MpcProfile<T>,
        noise: &NoiseModel<T>,
        weighting: DelayWeighting,
    ) -> Result<Self> {
        let pr = profile
            .total_power_dbm()
            .ok_or(Error::Empty("multipath components"))?;
        let k = k_factor(profile)?;
        let ds = delay_spread(profile, weighting)?;
        let conv = delay_spread(profile, DelayWeighting::Conventional)?;
        let q = snr_se_capacity(pr, noise)?;
        Ok(Self {
            frame_id: profile.frame_id,
            received_power_dbm: pr,
            k_factor_db: k.value_db,
            los_only: k.los_only,
            rms_delay_spread_ns: ds.rms_ns,
            mean_delay_ns: ds.mean_ns,
            rms_delay_spread_conventional_ns: conv.rms_ns,
            snr_db: q.snr_db,
            spectral_efficiency: q.spectral_efficiency,
            capacity_bps: q.capacity_bps,
        })
    }
}
