//! Gaseous absorption from the bundled specific-attenuation table.
//!
//! The table holds γ (dB/km) of moist air on a regular grid over frequency,
//! temperature, water-vapour density and pressure; values in between are
//! interpolated multilinearly. Temperature, humidity and pressure outside the
//! grid are clamped to its edges.

use std::sync::OnceLock;

use super::WeatherState;
use crate::error::{Error, Result};
use crate::Real;

const TABLE_CSV: &str = include_str!("../../data/gas_attenuation_v1.csv");

pub const GAS_TABLE_MIN_HZ: f64 = 100e9;
pub const GAS_TABLE_MAX_HZ: f64 = 200e9;

struct GasTable {
    freq_ghz: Vec<f64>,
    temp_c: Vec<f64>,
    rho: Vec<f64>,
    pressure: Vec<f64>,
    gamma: Vec<f64>,
}

impl GasTable {
    fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut row = [0.0; 5];
            for (i, v) in row.iter_mut().enumerate() {
                *v = rec
                    .get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Format(format!("gas table row {rec:?}")))?;
            }
            rows.push(row);
        }
        let axis = |i: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (f, t, rho, p) = (axis(0), axis(1), axis(2), axis(3));
        if f.len() * t.len() * rho.len() * p.len() != rows.len() {
            return Err(Error::Format("gas table is not a full grid".into()));
        }
        let mut gamma = vec![f64::NAN; rows.len()];
        let idx = |a: &[f64], x: f64| a.iter().position(|v| *v == x).unwrap();
        for r in &rows {
            let k = ((idx(&f, r[0]) * t.len() + idx(&t, r[1])) * rho.len() + idx(&rho, r[2]))
                * p.len()
                + idx(&p, r[3]);
            gamma[k] = r[4];
        }
        Ok(Self {
            freq_ghz: f,
            temp_c: t,
            rho,
            pressure: p,
            gamma,
        })
    }

    fn get(&self, i: [usize; 4]) -> f64 {
        let k = ((i[0] * self.temp_c.len() + i[1]) * self.rho.len() + i[2]) * self.pressure.len()
            + i[3];
        self.gamma[k]
    }

    fn interpolate(&self, f_ghz: f64, t: f64, rho: f64, p: f64) -> f64 {
        let cells = [
            bracket(&self.freq_ghz, f_ghz),
            bracket(&self.temp_c, t),
            bracket(&self.rho, rho),
            bracket(&self.pressure, p),
        ];
        let mut acc = 0.0;
        for corner in 0..16usize {
            let mut w = 1.0;
            let mut idx = [0usize; 4];
            for (d, &(lo, frac)) in cells.iter().enumerate() {
                if corner >> d & 1 == 1 {
                    idx[d] = lo + 1;
                    w *= frac;
                } else {
                    idx[d] = lo;
                    w *= 1.0 - frac;
                }
            }
            if w != 0.0 {
                acc += w * self.get(idx);
            }
        }
        acc
    }
}

/// Lower grid index and fractional position of `x`, clamped to the axis.
fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let hi = axis.partition_point(|v| *v <= x).min(n - 1);
    let lo = hi - 1;
    (lo, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

fn table() -> &'static GasTable {
    static TABLE: OnceLock<GasTable> = OnceLock::new();
    TABLE.get_or_init(|| GasTable::parse(TABLE_CSV).expect("bundled gas table is well formed"))
}

/// Specific attenuation γ in dB/km.
pub fn gas_specific_attenuation<T: Real>(state: &WeatherState<T>, frequency_hz: T) -> Result<T> {
    state.validate()?;
    let f = frequency_hz.as_f64();
    if !(GAS_TABLE_MIN_HZ..=GAS_TABLE_MAX_HZ).contains(&f) {
        return Err(Error::OutOfRange {
            what: "gas table frequency (Hz)",
            value: f,
            min: GAS_TABLE_MIN_HZ,
            max: GAS_TABLE_MAX_HZ,
        });
    }
    let g = table().interpolate(
        f / 1e9,
        state.temperature_c.as_f64(),
        state.water_vapor_gm3.as_f64(),
        state.pressure_hpa.as_f64(),
    );
    Ok(T::lit(g))
}

/// Gaseous absorption over `distance_m`, in dB.
pub fn gas_attenuation<T: Real>(state: &WeatherState<T>, frequency_hz: T, distance_m: T) -> Result<T> {
    if !(distance_m >= T::zero()) {
        return Err(Error::InvalidParameter("distance must be ≥ 0".into()));
    }
    Ok(gas_specific_attenuation(state, frequency_hz)? * distance_m / T::lit(1000.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::PrecipitationKind;
    use crate::Scenario;

    fn state(t: f64, rho: f64, p: f64) -> WeatherState<f64> {
        WeatherState {
            temperature_c: t,
            water_vapor_gm3: rho,
            pressure_hpa: p,
            precipitation_rate_mm_h: 0.0,
            precipitation_kind: PrecipitationKind::None,
            timestamp_s: 0.0,
        }
    }

    #[test]
    fn grid_points_reproduce_table_rows() {
        // a few rows copied from the bundled file
        let rows = TABLE_CSV
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .step_by(997)
            .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>());
        for r in rows {
            let g = gas_specific_attenuation(&state(r[1], r[2], r[3]), r[0] * 1e9).unwrap();
            assert!((g - r[4]).abs() < 1e-12, "{r:?} -> {g}");
        }
    }

    #[test]
    fn clear_campaign_conditions_match_line_by_line_value() {
        // reference γ = 0.63493 dB/km from the line-by-line model at
        // 140 GHz, 1026 hPa, 5.15 g/m³, 12.23 °C
        let s = WeatherState::<f64>::campaign_mean(Scenario::Clear);
        let g = gas_specific_attenuation(&s, 140e9).unwrap();
        assert!((g - 0.63493).abs() < 0.01, "{g}");
        let l = gas_attenuation(&s, 140e9, 70.0).unwrap();
        assert!(l <= 0.05 && l > 0.01, "{l}");
    }

    #[test]
    fn out_of_table_frequency_is_rejected() {
        let s = state(10.0, 5.0, 1000.0);
        assert!(matches!(
            gas_attenuation(&s, 90e9, 70.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(gas_attenuation(&s, 201e9, 70.0).is_err());
    }

    #[test]
    fn linear_in_distance() {
        let s = state(10.0, 5.0, 1000.0);
        assert_eq!(gas_attenuation(&s, 140e9, 0.0).unwrap(), 0.0);
        let a = gas_attenuation(&s, 140e9, 70.0).unwrap();
        let b = gas_attenuation(&s, 140e9, 140.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn more_vapour_absorbs_more() {
        let lo = gas_specific_attenuation(&state(10.0, 2.0, 1000.0), 140e9).unwrap();
        let hi = gas_specific_attenuation(&state(10.0, 12.0, 1000.0), 140e9).unwrap();
        assert!(hi > lo);
    }
}
