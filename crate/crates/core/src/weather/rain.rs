//! Rain specific attenuation `γ = k·R^α` with the horizontal-polarization
//! coefficients of ITU-R P.838-3.

use crate::error::{Error, Result};
use crate::Real;

const KH_A: [f64; 4] = [-5.33980, -0.35351, -0.23789, -0.94158];
const KH_B: [f64; 4] = [-0.10008, 1.26970, 0.86036, 0.64552];
const KH_C: [f64; 4] = [1.13098, 0.45400, 0.15354, 0.16817];
const KH_M: f64 = -0.18961;
const KH_CK: f64 = 0.71147;

const AH_A: [f64; 5] = [-0.14318, 0.29591, 0.32177, -5.37610, 16.1721];
const AH_B: [f64; 5] = [1.82442, 0.77564, 0.63773, -0.96230, -3.29980];
const AH_C: [f64; 5] = [-0.55187, 0.19822, 0.13164, 1.47828, 3.43990];
const AH_M: f64 = 0.67849;
const AH_CA: f64 = -1.95537;

fn gaussian_sum(a: &[f64], b: &[f64], c: &[f64], x: f64) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((a, b), c)| a * (-((x - b) / c).powi(2)).exp())
        .sum()
}

/// `(k, α)` for horizontal polarization at `frequency_hz` (valid 1–1000 GHz).
pub fn rain_coefficients<T: Real>(frequency_hz: T) -> (T, T) {
    let lf = (frequency_hz.as_f64() / 1e9).log10();
    let log_k = gaussian_sum(&KH_A, &KH_B, &KH_C, lf) + KH_M * lf + KH_CK;
    let alpha = gaussian_sum(&AH_A, &AH_B, &AH_C, lf) + AH_M * lf + AH_CA;
    (T::lit(10f64.powf(log_k)), T::lit(alpha))
}

/// Specific attenuation in dB/km.
pub fn rain_specific_attenuation<T: Real>(rate_mm_h: T, frequency_hz: T) -> Result<T> {
    if !(rate_mm_h >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "rain rate {rate_mm_h} mm/h must be ≥ 0"
        )));
    }
    if rate_mm_h == T::zero() {
        return Ok(T::zero());
    }
    let (k, alpha) = rain_coefficients(frequency_hz);
    Ok(k * rate_mm_h.powf(alpha))
}

/// Rain attenuation over `distance_m`, in dB.
pub fn rain_attenuation<T: Real>(rate_mm_h: T, frequency_hz: T, distance_m: T) -> Result<T> {
    if !(distance_m >= T::zero()) {
        return Err(Error::InvalidParameter("distance must be ≥ 0".into()));
    }
    Ok(rain_specific_attenuation(rate_mm_h, frequency_hz)? * distance_m / T::lit(1000.0))
}
