//! Rician maximum-likelihood fit and CDF.

use super::special::{bessel_ratio, integrate, ln_bessel_i0};
use crate::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 500;
const LOGLIK_TOL: f64 = 1e-8;
const PARAM_TOL: f64 = 1e-9;

pub(crate) struct RicianFit {
    pub nu: f64,
    pub sigma: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Mean log-likelihood in (a = ν, b = 1/σ²).
fn mean_loglik(x: &[f64], a: f64, b: f64) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .map(|&xi| xi.ln() + b.ln() - 0.5 * b * (xi * xi + a * a) + ln_bessel_i0(xi * a * b))
        .sum::<f64>()
        / n
}

/// `dA/dz` for `A = I₁/I₀`.
fn ratio_slope(z: f64, a: f64) -> f64 {
    if z < 1e-6 {
        0.5 - 0.375 * z * z
    } else {
        1.0 - a / z - a * a
    }
}

/// Mean score `[∂a, ∂b]` and Hessian entries `[aa, ab, bb]` in (a, b).
fn derivatives(x: &[f64], a: f64, b: f64) -> ([f64; 2], [f64; 3]) {
    let n = x.len() as f64;
    let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &xi in x {
        let z = xi * a * b;
        let r = bessel_ratio(z);
        let dr = ratio_slope(z, r);
        ga += -b * a + xi * b * r;
        gb += 1.0 / b - 0.5 * (xi * xi + a * a) + xi * a * r;
        haa += -b + xi * xi * b * b * dr;
        hab += -a + xi * r + xi * xi * a * b * dr;
        hbb += -1.0 / (b * b) + xi * xi * a * a * dr;
    }
    ([ga / n, gb / n], [haa / n, hab / n, hbb / n])
}

/// One expectation-maximization update; always ascends.
fn em_step(x: &[f64], a: f64, b: f64, m2: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let a_new = (x.iter().map(|&xi| xi * bessel_ratio(xi * a * b)).sum::<f64>() / n).max(0.0);
    let var = (0.5 * (m2 - a_new * a_new)).max(m2 * 1e-12);
    (a_new, 1.0 / var)
}

/// Moment-matching start: `ν² = √(2m₂² − m₄)`, `σ² = (m₂ − ν²)/2`.
pub(crate) fn moment_start(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / n;
    let nu2 = (2.0 * m2 * m2 - m4).max(0.0).sqrt().min(m2 * (1.0 - 1e-6));
    let var = 0.5 * (m2 - nu2);
    (nu2.sqrt(), var.sqrt())
}

pub(crate) fn fit(samples: &[f64]) -> Result<RicianFit> {
    if samples.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "Rician fit needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "Rician samples must be positive and finite, found {bad}"
        )));
    }
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let (nu0, sigma0) = moment_start(samples);
    let (mut a, mut b) = (nu0, 1.0 / (sigma0 * sigma0));
    let mut ll = mean_loglik(samples, a, b);

    for it in 1..=MAX_ITERATIONS {
        let (g, [haa, hab, hbb]) = derivatives(samples, a, b);
        // Newton direction when the Hessian is negative definite
        let det = haa * hbb - hab * hab;
        let mut candidate = None;
        if haa < 0.0 && det > 0.0 {
            let da = -(hbb * g[0] - hab * g[1]) / det;
            let db = -(-hab * g[0] + haa * g[1]) / det;
            let mut t = 1.0;
            for _ in 0..30 {
                let (na, nb) = ((a + t * da).max(0.0), b + t * db);
                if nb > 0.0 {
                    let nll = mean_loglik(samples, na, nb);
                    if nll.is_finite() && nll >= ll {
                        candidate = Some((na, nb, nll));
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        let (na, nb, nll) = candidate.unwrap_or_else(|| {
            let (na, nb) = em_step(samples, a, b, m2);
            (na, nb, mean_loglik(samples, na, nb))
        });
        let dparam = ((na - a).abs() / (a.abs() + 1.0 / b.sqrt())).max((nb - b).abs() / b);
        let dll = (nll - ll).abs();
        a = na;
        b = nb;
        ll = nll;
        if dll < LOGLIK_TOL && dparam < PARAM_TOL.sqrt() {
            return Ok(RicianFit {
                nu: a,
                sigma: (1.0 / b).sqrt(),
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(RicianFit {
        nu: a,
        sigma: (1.0 / b).sqrt(),
        converged: false,
        iterations: MAX_ITERATIONS,
    })
}

/// Density, evaluated with the exponentially scaled Bessel function.
pub(crate) fn pdf(nu: f64, sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    let z = x * nu / s2;
    x / s2 * (-(x - nu).powi(2) / (2.0 * s2)).exp() * super::special::bessel_i0e(z)
}

/// Effective support half-width in units of σ.
const SUPPORT_SIGMAS: f64 = 40.0;

/// `1 − Q₁(ν/σ, x/σ)` by quadrature of the density over σ-wide panels.
pub(crate) fn cdf(nu: f64, sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lo = (nu - SUPPORT_SIGMAS * sigma).max(0.0);
    let hi = nu + SUPPORT_SIGMAS * sigma;
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    let f = |t: f64| pdf(nu, sigma, t);
    // integrate whichever side of x is closer to the bulk's centre of mass
    let (a, b, upper) = if x < nu { (lo, x, false) } else { (x, hi, true) };
    let panels = ((b - a) / sigma).ceil().max(1.0) as usize;
    let step = (b - a) / panels as f64;
    let mass: f64 = (0..panels)
        .map(|i| {
            let p0 = a + i as f64 * step;
            integrate(f, p0, p0 + step, 1e-13)
        })
        .sum();
    let v = if upper { 1.0 - mass } else { mass };
    v.clamp(0.0, 1.0)
}

/// Draw `|ν + σ(Z₁ + iZ₂)|`.
pub(crate) fn sample<R: rand::Rng>(nu: f64, sigma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            (nu + sigma * z1).hypot(sigma * z2)
        })
        .collect()
}
