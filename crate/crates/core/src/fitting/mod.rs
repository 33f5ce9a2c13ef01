//! Distribution fits for channel statistics: normal (K-factor), Rician and
//! alpha-stable (RMS delay spread), with CDF evaluation and a
//! Kolmogorov–Smirnov goodness-of-fit statistic.
//!
//! Stable laws use Nolan's 0-parameterization (S0), which is continuous in
//! all four parameters including α = 1.

mod normal;
mod rician;
pub mod special;
mod stable;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Above this many samples the KS statistic evaluates the fitted CDF at
/// this many evenly spaced order statistics and interpolates in between.
pub const KS_EXACT_LIMIT: usize = 5000;
const KS_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Rician,
    Stable,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Normal, Family::Rician, Family::Stable];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Rician => "rician",
            Family::Stable => "stable",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "rician" | "rice" => Ok(Family::Rician),
            "stable" | "alpha-stable" | "alpha_stable" => Ok(Family::Stable),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution family {other:?} (expected normal, rician or stable)"
            ))),
        }
    }
}

/// Family-tagged distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistParams<T> {
    Normal { mean: T, variance: T },
    Rician { nu: T, sigma: T },
    /// S0 parameterization.
    Stable { alpha: T, beta: T, gamma: T, delta: T },
}

impl<T: Real> DistParams<T> {
    pub fn family(&self) -> Family {
        match self {
            DistParams::Normal { .. } => Family::Normal,
            DistParams::Rician { .. } => Family::Rician,
            DistParams::Stable { .. } => Family::Stable,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistParams::Normal { mean, variance } => {
                let (m, v) = (mean.as_f64(), variance.as_f64());
                if !m.is_finite() || !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("normal(μ={m}, σ²={v})")));
                }
                Ok(())
            }
            DistParams::Rician { nu, sigma } => {
                let (n, s) = (nu.as_f64(), sigma.as_f64());
                if !(n >= 0.0 && n.is_finite()) || !(s > 0.0 && s.is_finite()) {
                    return Err(Error::InvalidParameter(format!("rician(ν={n}, σ={s})")));
                }
                Ok(())
            }
            DistParams::Stable { .. } => stable::validate(&self.stable_f64()),
        }
    }

    fn stable_f64(&self) -> stable::StableParams {
        match *self {
            DistParams::Stable { alpha, beta, gamma, delta } => stable::StableParams {
                alpha: alpha.as_f64(),
                beta: beta.as_f64(),
                gamma: gamma.as_f64(),
                delta: delta.as_f64(),
            },
            _ => unreachable!("not a stable parameter set"),
        }
    }

    /// CDF at `x`. Parameters are assumed valid.
    fn cdf_f64(&self, x: f64) -> f64 {
        match *self {
            DistParams::Normal { mean, variance } => normal::cdf(mean.as_f64(), variance.as_f64(), x),
            DistParams::Rician { nu, sigma } => rician::cdf(nu.as_f64(), sigma.as_f64(), x),
            DistParams::Stable { .. } => stable::cdf(&self.stable_f64(), x),
        }
    }

    /// Named parameter values in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, T)> {
        match *self {
            DistParams::Normal { mean, variance } => vec![("mean", mean), ("variance", variance)],
            DistParams::Rician { nu, sigma } => vec![("nu", nu), ("sigma", sigma)],
            DistParams::Stable { alpha, beta, gamma, delta } => {
                vec![("alpha", alpha), ("beta", beta), ("gamma", gamma), ("delta", delta)]
            }
        }
    }
}

/// A fitted distribution with goodness-of-fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    #[serde(flatten)]
    pub params: DistParams<T>,
    pub sample_count: usize,
    /// Largest gap between the empirical and fitted CDFs.
    pub ks_statistic: T,
    /// Zero-spread data (normal σ² = 0).
    pub degenerate: bool,
    /// False when an iterative fit stopped at its iteration cap.
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl<T: Real> FitResult<T> {
    pub fn family(&self) -> Family {
        self.params.family()
    }

    fn new(params: DistParams<T>, samples: &[f64]) -> Self {
        let ks = ks_statistic_f64(samples, &params);
        Self {
            params,
            sample_count: samples.len(),
            ks_statistic: T::lit(ks),
            degenerate: false,
            converged: true,
            warnings: Vec::new(),
        }
    }
}

fn to_f64<T: Real>(samples: &[T]) -> Vec<f64> {
    samples.iter().map(|v| v.as_f64()).collect()
}

/// Gaussian MLE: sample mean and biased variance. Constant data gives
/// `σ² = 0` with the degenerate flag set.
pub fn fit_normal<T: Real>(samples: &[T]) -> Result<FitResult<T>> {
    let x = to_f64(samples);
    let (mean, variance) = normal::fit(&x)?;
    let params = DistParams::Normal {
        mean: T::lit(mean),
        variance: T::lit(variance),
    };
    let mut out = FitResult::new(params, &x);
    if variance == 0.0 {
        out.degenerate = true;
        out.warnings.push("all samples identical; variance is zero".into());
    }
    Ok(out)
}

/// Rician MLE from a moment-matching start. Hitting the iteration cap
/// returns the best estimate with `converged = false` and a warning.
pub fn fit_rician<T: Real>(samples: &[T]) -> Result<FitResult<T>> {
    let x = to_f64(samples);
    let fit = rician::fit(&x)?;
    let params = DistParams::Rician {
        nu: T::lit(fit.nu),
        sigma: T::lit(fit.sigma),
    };
    let mut out = FitResult::new(params, &x);
    if !fit.converged {
        out.converged = false;
        out.warnings.push(format!(
            "likelihood ascent did not converge in {} iterations",
            fit.iterations
        ));
    }
    Ok(out)
}

/// McCulloch quantile estimate of S0 stable parameters. β is not
/// constrained beyond `[−1, 1]`.
pub fn fit_stable<T: Real>(samples: &[T]) -> Result<FitResult<T>> {
    let x = to_f64(samples);
    let p = stable::fit_mcculloch(&x)?;
    let params = DistParams::Stable {
        alpha: T::lit(p.alpha),
        beta: T::lit(p.beta),
        gamma: T::lit(p.gamma),
        delta: T::lit(p.delta),
    };
    Ok(FitResult::new(params, &x))
}

pub fn fit<T: Real>(family: Family, samples: &[T]) -> Result<FitResult<T>> {
    match family {
        Family::Normal => fit_normal(samples),
        Family::Rician => fit_rician(samples),
        Family::Stable => fit_stable(samples),
    }
}

/// Fitted CDF at `x`.
pub fn eval_cdf<T: Real>(params: &DistParams<T>, x: T) -> Result<T> {
    params.validate()?;
    Ok(T::lit(params.cdf_f64(x.as_f64())))
}

/// Fitted CDF on a grid of points, evaluated in parallel.
pub fn eval_cdf_many<T: Real>(params: &DistParams<T>, xs: &[T]) -> Result<Vec<T>> {
    params.validate()?;
    Ok(xs.par_iter().map(|x| T::lit(params.cdf_f64(x.as_f64()))).collect())
}

/// Kolmogorov–Smirnov distance between the sample and a fitted law.
///
/// Up to [`KS_EXACT_LIMIT`] samples the CDF is evaluated at every sample.
/// Larger samples evaluate it at 4096 evenly spaced order statistics and
/// interpolate linearly in `x` between them.
pub fn ks_statistic<T: Real>(samples: &[T], params: &DistParams<T>) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    params.validate()?;
    Ok(T::lit(ks_statistic_f64(&to_f64(samples), params)))
}

fn ks_statistic_f64<T: Real>(samples: &[f64], params: &DistParams<T>) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    let fitted: Vec<f64> = if n <= KS_EXACT_LIMIT {
        x.par_iter().map(|v| params.cdf_f64(*v)).collect()
    } else {
        let idx: Vec<usize> = (0..KS_GRID).map(|k| k * (n - 1) / (KS_GRID - 1)).collect();
        let knots_x: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let knots_f: Vec<f64> = knots_x.par_iter().map(|v| params.cdf_f64(*v)).collect();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for (i, v) in x.iter().enumerate() {
            while seg + 1 < KS_GRID - 1 && idx[seg + 1] < i {
                seg += 1;
            }
            let (x0, x1) = (knots_x[seg], knots_x[seg + 1]);
            let (f0, f1) = (knots_f[seg], knots_f[seg + 1]);
            out.push(if x1 > x0 { f0 + (f1 - f0) * (v - x0) / (x1 - x0) } else { f0 });
        }
        out
    };
    let nf = n as f64;
    fitted
        .iter()
        .enumerate()
        .map(|(i, f)| (((i + 1) as f64 / nf) - f).max(f - i as f64 / nf))
        .fold(0.0, f64::max)
}

/// Seeded draws from a parameter set (Chambers–Mallows–Stuck for stable).
pub fn sample<T: Real, R: rand::Rng>(params: &DistParams<T>, n: usize, rng: &mut R) -> Result<Vec<T>> {
    use rand_distr::{Distribution, StandardNormal};
    params.validate()?;
    let x: Vec<f64> = match *params {
        DistParams::Normal { mean, variance } => {
            let (m, s) = (mean.as_f64(), variance.as_f64().sqrt());
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect()
        }
        DistParams::Rician { nu, sigma } => rician::sample(nu.as_f64(), sigma.as_f64(), n, rng),
        DistParams::Stable { .. } => stable::sample(&params.stable_f64(), n, rng),
    };
    Ok(x.into_iter().map(T::lit).collect())
}
