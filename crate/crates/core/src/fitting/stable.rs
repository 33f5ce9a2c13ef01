//! Alpha-stable distributions in Nolan's 0-parameterization (S0).
//!
//! `X ~ S0(α, β, γ, δ)` is a location-scale family: `(X − δ)/γ` is standard
//! S0. The CDF is evaluated from Nolan's integral form of the
//! characteristic-function inversion, parameters are estimated with
//! McCulloch's quantile method and samples are drawn with the
//! Chambers–Mallows–Stuck transform.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI, SQRT_2};

use super::special::{integrate, normal_cdf, quantile_sorted};
use crate::{Error, Result};

/// Below this distance from 1, α is treated as exactly 1.
const ALPHA_ONE_TOL: f64 = 1e-7;
const QUAD_TOL: f64 = 1e-12;

// McCulloch (1986) tables III and IV, indexed [ν_α][ν_β].
const NU_ALPHA: [f64; 15] = [
    2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 25.0,
];
const NU_BETA: [f64; 7] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
#[rustfmt::skip]
const ALPHA_TABLE: [[f64; 7]; 15] = [
    [2.000, 2.000, 2.000, 2.000, 2.000, 2.000, 2.000],
    [1.916, 1.924, 1.924, 1.924, 1.924, 1.924, 1.924],
    [1.808, 1.813, 1.829, 1.829, 1.829, 1.829, 1.829],
    [1.729, 1.730, 1.737, 1.745, 1.745, 1.745, 1.745],
    [1.664, 1.663, 1.663, 1.668, 1.676, 1.676, 1.676],
    [1.563, 1.560, 1.553, 1.548, 1.547, 1.547, 1.547],
    [1.484, 1.480, 1.471, 1.460, 1.448, 1.438, 1.438],
    [1.391, 1.386, 1.378, 1.364, 1.337, 1.318, 1.318],
    [1.279, 1.273, 1.266, 1.250, 1.210, 1.184, 1.150],
    [1.128, 1.121, 1.114, 1.101, 1.067, 1.027, 0.973],
    [1.029, 1.021, 1.014, 1.004, 0.974, 0.935, 0.874],
    [0.896, 0.892, 0.884, 0.883, 0.855, 0.823, 0.769],
    [0.818, 0.812, 0.806, 0.801, 0.780, 0.756, 0.691],
    [0.698, 0.695, 0.692, 0.689, 0.676, 0.656, 0.597],
    [0.593, 0.590, 0.588, 0.586, 0.579, 0.563, 0.513],
];
#[rustfmt::skip]
const BETA_TABLE: [[f64; 7]; 15] = [
    [0.0, 2.160, 1.000, 1.000, 1.000, 1.000, 1.000],
    [0.0, 1.592, 3.390, 1.000, 1.000, 1.000, 1.000],
    [0.0, 0.759, 1.800, 1.000, 1.000, 1.000, 1.000],
    [0.0, 0.482, 1.048, 1.694, 1.000, 1.000, 1.000],
    [0.0, 0.360, 0.760, 1.232, 2.229, 1.000, 1.000],
    [0.0, 0.253, 0.518, 0.823, 1.575, 1.000, 1.000],
    [0.0, 0.203, 0.410, 0.632, 1.244, 1.906, 1.000],
    [0.0, 0.165, 0.332, 0.499, 0.943, 1.560, 1.000],
    [0.0, 0.136, 0.271, 0.404, 0.689, 1.230, 2.195],
    [0.0, 0.109, 0.216, 0.323, 0.539, 0.827, 1.917],
    [0.0, 0.096, 0.190, 0.284, 0.472, 0.693, 1.759],
    [0.0, 0.082, 0.163, 0.243, 0.412, 0.601, 1.596],
    [0.0, 0.074, 0.147, 0.220, 0.377, 0.546, 1.482],
    [0.0, 0.064, 0.128, 0.191, 0.330, 0.478, 1.362],
    [0.0, 0.056, 0.112, 0.167, 0.285, 0.428, 1.274],
];

// Tables V and VII, indexed [α][|β|] with α = 0.5, 0.6, …, 2.0.
const ALPHA_GRID: [f64; 16] = [
    0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0,
];
const BETA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
#[rustfmt::skip]
const NU_C_TABLE: [[f64; 5]; 16] = [
    [2.588, 3.073, 4.534, 6.636, 9.144],
    [2.337, 2.634, 3.542, 4.808, 6.247],
    [2.189, 2.392, 3.004, 3.844, 4.775],
    [2.098, 2.244, 2.676, 3.265, 3.912],
    [2.040, 2.149, 2.461, 2.886, 3.356],
    [2.000, 2.085, 2.311, 2.624, 2.973],
    [1.980, 2.040, 2.205, 2.435, 2.696],
    [1.965, 2.007, 2.125, 2.294, 2.491],
    [1.955, 1.984, 2.067, 2.188, 2.333],
    [1.946, 1.967, 2.022, 2.106, 2.211],
    [1.939, 1.952, 1.988, 2.045, 2.116],
    [1.933, 1.940, 1.962, 1.997, 2.043],
    [1.927, 1.930, 1.943, 1.961, 1.987],
    [1.921, 1.922, 1.927, 1.936, 1.947],
    [1.914, 1.915, 1.916, 1.918, 1.921],
    [1.908, 1.908, 1.908, 1.908, 1.908],
];
#[rustfmt::skip]
const NU_ZETA_TABLE: [[f64; 5]; 16] = [
    [0.0, -0.061, -0.279, -0.659, -1.198],
    [0.0, -0.078, -0.272, -0.581, -0.997],
    [0.0, -0.089, -0.262, -0.520, -0.853],
    [0.0, -0.096, -0.250, -0.469, -0.742],
    [0.0, -0.099, -0.237, -0.424, -0.652],
    [0.0, -0.098, -0.223, -0.380, -0.576],
    [0.0, -0.095, -0.208, -0.346, -0.508],
    [0.0, -0.090, -0.192, -0.310, -0.447],
    [0.0, -0.084, -0.173, -0.276, -0.390],
    [0.0, -0.075, -0.154, -0.241, -0.335],
    [0.0, -0.066, -0.134, -0.206, -0.283],
    [0.0, -0.056, -0.111, -0.170, -0.232],
    [0.0, -0.043, -0.088, -0.132, -0.179],
    [0.0, -0.030, -0.061, -0.092, -0.123],
    [0.0, -0.017, -0.032, -0.049, -0.064],
    [0.0, 0.0, 0.0, 0.0, 0.0],
];

/// Bracketing index and weight on an increasing grid, clamped to its ends.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let hi = grid.partition_point(|g| *g <= x).min(n - 1);
    let lo = hi - 1;
    (lo, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

/// Bilinear interpolation of `table[row][col]` at `(r, c)`.
fn bilinear<const C: usize>(table: &[[f64; C]], rows: &[f64], cols: &[f64], r: f64, c: f64) -> f64 {
    let (i, u) = locate(rows, r);
    let (j, v) = locate(cols, c);
    let t00 = table[i][j];
    let t01 = table[i][j + 1];
    let t10 = table[i + 1][j];
    let t11 = table[i + 1][j + 1];
    (1.0 - u) * ((1.0 - v) * t00 + v * t01) + u * ((1.0 - v) * t10 + v * t11)
}

/// S0 parameters `(α, β, γ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

pub(crate) fn validate(p: &StableParams) -> Result<()> {
    if !(p.alpha > 0.0 && p.alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("stable α = {} outside (0, 2]", p.alpha)));
    }
    if !(-1.0..=1.0).contains(&p.beta) {
        return Err(Error::InvalidParameter(format!("stable β = {} outside [−1, 1]", p.beta)));
    }
    if !(p.gamma > 0.0 && p.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("stable γ = {} must be positive", p.gamma)));
    }
    if !p.delta.is_finite() {
        return Err(Error::InvalidParameter("stable δ must be finite".into()));
    }
    Ok(())
}

/// McCulloch quantile estimate from the 5/25/50/75/95 % sample quantiles.
pub(crate) fn fit_mcculloch(samples: &[f64]) -> Result<StableParams> {
    if samples.len() < 100 {
        return Err(Error::InvalidParameter(format!(
            "stable fit needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let [p05, p25, p50, p75, p95] = [0.05, 0.25, 0.5, 0.75, 0.95].map(|p| quantile_sorted(&sorted, p));
    if p95 == p05 {
        return Err(Error::DegenerateQuantiles(format!("q95 = q5 = {p05}")));
    }
    let nu_alpha = (p95 - p05) / (p75 - p25);
    let nu_beta = (p95 + p05 - 2.0 * p50) / (p95 - p05);

    let (alpha, beta) = if nu_alpha >= NU_ALPHA[0] {
        let a = bilinear(&ALPHA_TABLE, &NU_ALPHA, &NU_BETA, nu_alpha, nu_beta.abs());
        let b = bilinear(&BETA_TABLE, &NU_ALPHA, &NU_BETA, nu_alpha, nu_beta.abs());
        (a.clamp(f64::EPSILON, 2.0), (nu_beta.signum() * b).clamp(-1.0, 1.0))
    } else {
        // tails lighter than any stable law: Gaussian, symmetric
        (2.0, 0.0)
    };
    let nu_c = bilinear(&NU_C_TABLE, &ALPHA_GRID, &BETA_GRID, alpha, beta.abs());
    let nu_zeta = beta.signum() * bilinear(&NU_ZETA_TABLE, &ALPHA_GRID, &BETA_GRID, alpha, beta.abs());
    let gamma = (p75 - p25) / nu_c;
    if !(gamma > 0.0) {
        return Err(Error::DegenerateQuantiles(format!("interquartile range {}", p75 - p25)));
    }
    let zeta = p50 + gamma * nu_zeta;
    // the tables' location is S0 except at α = 1, where it is S1
    let delta = if alpha == 1.0 { zeta + FRAC_2_PI * beta * gamma * gamma.ln() } else { zeta };
    Ok(StableParams { alpha, beta, gamma, delta })
}

/// Natural log of Nolan's `V(θ)` plus the `x`-dependent prefactor, α ≠ 1.
fn ln_g(x_minus_zeta: f64, alpha: f64, xi: f64, theta: f64) -> f64 {
    let am1 = alpha - 1.0;
    let cos_t = theta.cos();
    (alpha / am1) * (x_minus_zeta.ln() + cos_t.ln() - (alpha * (xi + theta)).sin().ln())
        + (alpha * xi).cos().ln() / am1
        + (alpha * xi + am1 * theta).cos().ln()
        - cos_t.ln()
}

/// `ln g(θ)` for α = 1, β > 0.
fn ln_g_one(x: f64, beta: f64, theta: f64) -> f64 {
    let w = FRAC_PI_2 + beta * theta;
    -PI * x / (2.0 * beta) + FRAC_2_PI.ln() + w.ln() - theta.cos().ln() + w * theta.tan() / beta
}

/// `∫ exp(−exp(ln_g(θ))) dθ` over `[a, b]`, split where `g = 1`.
fn integrate_exp_neg_g<F: Fn(f64) -> f64>(ln_g: F, a: f64, b: f64) -> f64 {
    let f = |t: f64| {
        let v = (-ln_g(t).exp()).exp();
        if v.is_nan() {
            0.0
        } else {
            v
        }
    };
    // ln g is monotone in θ; bisect for its zero to place a breakpoint at the
    // transition of the integrand
    let width = b - a;
    let (mut lo, mut hi) = (a + 1e-12 * width, b - 1e-12 * width);
    let (sl, sh) = (ln_g(lo), ln_g(hi));
    let mut breaks = vec![a];
    if sl.is_finite() && sh.is_finite() && sl.signum() != sh.signum() {
        let rising = sh > sl;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let v = ln_g(mid);
            if (v > 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        breaks.push(0.5 * (lo + hi));
    }
    breaks.push(b);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let pieces = 8;
        let step = (w[1] - w[0]) / pieces as f64;
        for k in 0..pieces {
            let p0 = w[0] + k as f64 * step;
            total += integrate(f, p0, p0 + step, QUAD_TOL);
        }
    }
    total
}

/// CDF of the standard S0 law (`γ = 1`, `δ = 0`).
pub(crate) fn cdf_standard(x: f64, alpha: f64, beta: f64) -> f64 {
    if alpha == 2.0 {
        return normal_cdf(x / SQRT_2);
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    if (alpha - 1.0).abs() < ALPHA_ONE_TOL {
        if beta == 0.0 {
            return 0.5 + x.atan() / PI;
        }
        if beta < 0.0 {
            return 1.0 - cdf_standard(-x, alpha, -beta);
        }
        let v = integrate_exp_neg_g(|t| ln_g_one(x, beta, t), -FRAC_PI_2, FRAC_PI_2) / PI;
        return v.clamp(0.0, 1.0);
    }
    let zeta = -beta * (PI * alpha / 2.0).tan();
    if x < zeta {
        return 1.0 - cdf_standard(-x, alpha, -beta);
    }
    let xi = (-zeta).atan() / alpha;
    if x == zeta {
        return 0.5 - xi / PI;
    }
    let integral = integrate_exp_neg_g(|t| ln_g(x - zeta, alpha, xi, t), -xi, FRAC_PI_2);
    let v = if alpha < 1.0 {
        (FRAC_PI_2 - xi) / PI + integral / PI
    } else {
        1.0 - integral / PI
    };
    v.clamp(0.0, 1.0)
}

pub(crate) fn cdf(p: &StableParams, x: f64) -> f64 {
    cdf_standard((x - p.delta) / p.gamma, p.alpha, p.beta)
}

/// Chambers–Mallows–Stuck draws from `S0(α, β, γ, δ)`.
pub(crate) fn sample<R: rand::Rng>(p: &StableParams, n: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::{Distribution, Exp1, Uniform};
    let uniform = Uniform::new(-FRAC_PI_2, FRAC_PI_2).expect("valid range");
    let StableParams { alpha, beta, gamma, delta } = *p;
    let one = (alpha - 1.0).abs() < ALPHA_ONE_TOL;
    let tan_pa = (PI * alpha / 2.0).tan();
    let b = (beta * tan_pa).atan() / alpha;
    let s = (1.0 + beta * beta * tan_pa * tan_pa).powf(1.0 / (2.0 * alpha));
    (0..n)
        .map(|_| {
            let u: f64 = uniform.sample(rng);
            let w: f64 = Exp1.sample(rng);
            if one {
                let h = FRAC_PI_2 + beta * u;
                let x1 = FRAC_2_PI * (h * u.tan() - beta * ((FRAC_PI_2 * w * u.cos()) / h).ln());
                // standard S1 at α = 1; γX + δ is then S0(1, β, γ, δ)
                gamma * x1 + delta
            } else {
                let x1 = s * (alpha * (u + b)).sin() / u.cos().powf(1.0 / alpha)
                    * ((u - alpha * (u + b)).cos() / w).powf((1.0 - alpha) / alpha);
                gamma * (x1 - beta * tan_pa) + delta
            }
        })
        .collect()
}
