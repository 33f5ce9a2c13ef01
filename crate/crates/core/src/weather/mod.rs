//! Link budget and atmospheric attenuation: free-space loss, gaseous
//! absorption, rain and snow scattering.

mod budget;
mod gas;
mod mie;
mod rain;
mod snow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub use budget::{fspl, link_budget_eval, LedgerTerm, LinkBudget, LinkLedger, SPEED_OF_LIGHT, TERM_NAMES};
pub use gas::{gas_attenuation, gas_specific_attenuation, GAS_TABLE_MAX_HZ, GAS_TABLE_MIN_HZ};
pub use mie::{debye_mixture, mie_extinction, EPS_ICE_140GHZ, EPS_WATER_140GHZ};
pub use rain::{rain_attenuation, rain_coefficients, rain_specific_attenuation};
pub use snow::{
    calibrate_wetness, gunn_marshall, snow_attenuation, snowflake_count, SizeBin, SizeIntegration,
    SnowModelParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecipitationKind {
    None,
    Rain,
    Snow,
}

/// One atmospheric reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherState<T> {
    pub temperature_c: T,
    pub water_vapor_gm3: T,
    pub pressure_hpa: T,
    pub precipitation_rate_mm_h: T,
    pub precipitation_kind: PrecipitationKind,
    pub timestamp_s: T,
}

impl<T: Real> WeatherState<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_hpa > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "pressure {} hPa must be > 0",
                self.pressure_hpa
            )));
        }
        if !(self.water_vapor_gm3 >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "water vapour density {} g/m³ must be ≥ 0",
                self.water_vapor_gm3
            )));
        }
        if !(self.precipitation_rate_mm_h >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "precipitation rate {} mm/h must be ≥ 0",
                self.precipitation_rate_mm_h
            )));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::InvalidParameter("temperature must be finite".into()));
        }
        Ok(())
    }

    /// Mean campaign conditions for `scenario`.
    pub fn campaign_mean(scenario: crate::Scenario) -> Self {
        let (t, rho, p, r, kind) = match scenario {
            crate::Scenario::Clear => (12.23, 5.15, 1026.0, 0.0, PrecipitationKind::None),
            crate::Scenario::Rain => (7.23, 7.09, 1014.0, 1.84, PrecipitationKind::Rain),
            crate::Scenario::Snow => (-2.32, 3.54, 1020.0, 0.45, PrecipitationKind::Snow),
        };
        Self {
            temperature_c: T::lit(t),
            water_vapor_gm3: T::lit(rho),
            pressure_hpa: T::lit(p),
            precipitation_rate_mm_h: T::lit(r),
            precipitation_kind: kind,
            timestamp_s: T::zero(),
        }
    }
}
