//! Gaussian maximum-likelihood fit.

use super::special::normal_cdf;
use crate::{Error, Result};

/// MLE `(μ, σ²)`: sample mean and biased sample variance.
pub(crate) fn fit(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "normal fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    // second pass on deviations avoids cancellation for large offsets
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, variance))
}

pub(crate) fn cdf(mean: f64, variance: f64, x: f64) -> f64 {
    if variance == 0.0 {
        return if x >= mean { 1.0 } else { 0.0 };
    }
    normal_cdf((x - mean) / variance.sqrt())
}
