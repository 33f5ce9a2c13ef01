//! Mie extinction efficiency of a homogeneous sphere and the Debye
//! (Clausius–Mossotti) ice/water mixing rule.
//!
//! Dielectric constants follow the `ε = ε' + jε''` convention with
//! `ε'' ≥ 0` for an absorbing medium. The series is evaluated in `f64`
//! whatever the caller's scalar type.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::Real;

/// Ice at −2.32 °C and 140 GHz (Mätzler 2006 model).
pub const EPS_ICE_140GHZ: Complex<f64> = Complex::new(3.1863, 0.01225);
/// Liquid water at 0 °C and 140 GHz (Liebe 1991 double-Debye model).
pub const EPS_WATER_140GHZ: Complex<f64> = Complex::new(5.9018, 5.9988);

/// Effective permittivity of an ice/water mixture with liquid fraction
/// `wetness`, mixing the Clausius–Mossotti factors `(ε − 1)/(ε + 2)` linearly.
pub fn debye_mixture<T: Real>(
    eps_ice: Complex<T>,
    eps_water: Complex<T>,
    wetness: T,
) -> Result<Complex<T>> {
    if !(wetness >= T::zero() && wetness <= T::one()) {
        return Err(Error::OutOfRange {
            what: "wetness",
            value: wetness.as_f64(),
            min: 0.0,
            max: 1.0,
        });
    }
    if wetness == T::zero() {
        return Ok(eps_ice);
    }
    if wetness == T::one() {
        return Ok(eps_water);
    }
    let one = Complex::new(T::one(), T::zero());
    let two = Complex::new(T::lit(2.0), T::zero());
    let cm = |e: Complex<T>| (e - one) / (e + two);
    let y = cm(eps_ice) * (T::one() - wetness) + cm(eps_water) * wetness;
    Ok((one + y * T::lit(2.0)) / (one - y))
}

/// Extinction efficiency `Q_ext = (2/χ²) Σ (2m+1) Re{a_m + b_m}`.
pub fn mie_extinction<T: Real>(n: Complex<T>, chi: T) -> Result<T> {
    let chi = chi.as_f64();
    let m = Complex::new(n.re.as_f64(), n.im.as_f64());
    if !(chi > 0.0) || !chi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "size parameter {chi} must be > 0"
        )));
    }
    if m.im < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "refractive index {m} must have Im ≥ 0"
        )));
    }
    if m == Complex::new(1.0, 0.0) {
        return Ok(T::zero());
    }
    let q = qext_f64(m, chi);
    if !q.is_finite() {
        return Err(Error::Numerical(format!(
            "Mie series diverged for n = {m}, χ = {chi}"
        )));
    }
    Ok(T::lit(q))
}

/// Number of series terms retained for size parameter `chi`.
pub(crate) fn series_terms(chi: f64) -> usize {
    (chi + 4.0 * chi.cbrt() + 2.0).ceil() as usize
}

fn qext_f64(m: Complex<f64>, x: f64) -> f64 {
    let nmax = series_terms(x);
    let mx = m * x;
    // logarithmic derivative D_n(mx) by downward recurrence
    let nstart = nmax.max(mx.norm().ceil() as usize) + 16;
    let mut d = vec![Complex::new(0.0, 0.0); nstart + 1];
    for k in (1..=nstart).rev() {
        let kk = Complex::new(k as f64, 0.0) / mx;
        d[k - 1] = kk - Complex::new(1.0, 0.0) / (d[k] + kk);
    }

    // Riccati–Bessel ψ_n and χ_n by upward recurrence
    let (mut psi0, mut psi1) = (x.cos(), x.sin());
    let (mut chi0, mut chi1) = (-x.sin(), x.cos());
    let mut xi1 = Complex::new(psi1, -chi1);
    let mut sum = 0.0;
    for k in 1..=nmax {
        let kf = k as f64;
        let psi = (2.0 * kf - 1.0) / x * psi1 - psi0;
        let chi = (2.0 * kf - 1.0) / x * chi1 - chi0;
        let xi = Complex::new(psi, -chi);
        let da = d[k] / m + kf / x;
        let db = d[k] * m + kf / x;
        let a = (da * psi - psi1) / (da * xi - xi1);
        let b = (db * psi - psi1) / (db * xi - xi1);
        sum += (2.0 * kf + 1.0) * (a.re + b.re);
        psi0 = psi1;
        psi1 = psi;
        chi0 = chi1;
        chi1 = chi;
        xi1 = Complex::new(psi1, -chi1);
    }
    2.0 / (x * x) * sum
}
