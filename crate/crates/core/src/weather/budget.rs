//! Received-power ledger `P_r = P_s + G_s + G_r + G_h − L_h − L_FSPL − L_abs − L_sc`.

use serde::{Deserialize, Serialize};

use super::gas::gas_attenuation;
use super::rain::rain_attenuation;
use super::snow::{snow_attenuation, SnowModelParams};
use super::{PrecipitationKind, WeatherState};
use crate::error::{Error, Result};
use crate::Real;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space path loss `20·log10(4π·d·f/c)` in dB.
pub fn fspl<T: Real>(frequency_hz: T, distance_m: T) -> Result<T> {
    if !(frequency_hz > T::zero() && distance_m > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "FSPL needs positive frequency and distance, got {frequency_hz} Hz, {distance_m} m"
        )));
    }
    let arg = T::lit(4.0) * T::PI() * distance_m * frequency_hz / T::lit(SPEED_OF_LIGHT);
    Ok(T::lit(20.0) * arg.log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget<T> {
    pub tx_power_dbm: T,
    pub tx_gain_dbi: T,
    pub rx_gain_dbi: T,
    pub hw_gain_db: T,
    pub hw_loss_db: T,
    pub distance_m: T,
    pub center_frequency_hz: T,
    /// Used when the weather reports snow.
    pub snow: SnowModelParams<T>,
}

impl<T: Real> Default for LinkBudget<T> {
    /// The 70 m, 140 GHz campus link with 16 dBm into 38 dBi horns.
    fn default() -> Self {
        Self {
            tx_power_dbm: T::lit(16.0),
            tx_gain_dbi: T::lit(38.0),
            rx_gain_dbi: T::lit(38.0),
            hw_gain_db: T::zero(),
            hw_loss_db: T::zero(),
            distance_m: T::lit(70.0),
            center_frequency_hz: T::lit(140e9),
            snow: SnowModelParams::default(),
        }
    }
}

impl<T: Real> LinkBudget<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > T::zero()) {
            return Err(Error::InvalidParameter("link distance must be > 0".into()));
        }
        if !(self.center_frequency_hz > T::zero()) {
            return Err(Error::InvalidParameter("center frequency must be > 0".into()));
        }
        Ok(())
    }

    pub fn eirp_dbm(&self) -> T {
        self.tx_power_dbm + self.tx_gain_dbi
    }
}

/// One signed entry of the ledger; losses carry a negative value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerTerm<T> {
    pub name: &'static str,
    pub value_db: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkLedger<T> {
    pub terms: Vec<LedgerTerm<T>>,
    pub received_power_dbm: T,
}

impl<T: Real> LinkLedger<T> {
    pub fn term(&self, name: &str) -> Option<T> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value_db)
    }
}

pub const TERM_NAMES: [&str; 8] = [
    "tx_power", "tx_gain", "rx_gain", "hw_gain", "hw_loss", "fspl", "absorption", "scattering",
];

/// Evaluates the ledger for one weather reading. The total is the in-order
/// sum of the listed terms.
pub fn link_budget_eval<T: Real>(budget: &LinkBudget<T>, state: &WeatherState<T>) -> Result<LinkLedger<T>> {
    budget.validate()?;
    state.validate()?;
    let f = budget.center_frequency_hz;
    let d = budget.distance_m;
    let l_fspl = fspl(f, d)?;
    let l_abs = gas_attenuation(state, f, d)?;
    let rate = state.precipitation_rate_mm_h;
    let l_sc = match state.precipitation_kind {
        PrecipitationKind::None => T::zero(),
        PrecipitationKind::Rain => rain_attenuation(rate, f, d)?,
        PrecipitationKind::Snow => {
            let mut snow = budget.snow.clone();
            snow.link_length_m = d;
            snow_attenuation(rate, &snow, f)?
        }
    };
    let values = [
        budget.tx_power_dbm,
        budget.tx_gain_dbi,
        budget.rx_gain_dbi,
        budget.hw_gain_db,
        -budget.hw_loss_db,
        -l_fspl,
        -l_abs,
        -l_sc,
    ];
    let terms: Vec<LedgerTerm<T>> = TERM_NAMES
        .iter()
        .zip(values)
        .map(|(&name, value_db)| LedgerTerm { name, value_db })
        .collect();
    let received_power_dbm = terms.iter().fold(T::zero(), |acc, t| acc + t.value_db);
    Ok(LinkLedger {
        terms,
        received_power_dbm,
    })
}
