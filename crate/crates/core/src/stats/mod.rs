//! Statistical helpers for replication experiments.

mod ks;
mod normal;

use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::unit_uniform;

pub use ks::{kolmogorov_limit_sf, kolmogorov_sf, ks_normal_test, KsResult};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};

/// Standard normal draw by inversion.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    loop {
        let u = unit_uniform(rng);
        if u > 0.0 {
            return normal_quantile(u);
        }
    }
}

/// Sorted samples paired with `N(mu, sigma²)` quantiles at plotting
/// positions `(k − 1/2)/n`, as `(theoretical, empirical)`.
pub fn qq_points(samples: &[f64], mu: f64, sigma: f64) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput("sigma must be positive and finite"));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidInput("QQ data needs at least two samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, x)| (mu + sigma * normal_quantile((k as f64 + 0.5) / n), x))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Unbiased sample standard deviation over `√k`; NaN when `k = 1`.
    pub stderr: f64,
    pub k: usize,
}

pub fn summarize_reps(values: &[f64]) -> Result<Summary> {
    let k = values.len();
    if k == 0 {
        return Err(Error::InvalidInput("no replications to summarize"));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let stderr = if k < 2 {
        f64::NAN
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
        libm::sqrt(var / k as f64)
    };
    Ok(Summary { mean, stderr, k })
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("variance needs at least two values"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64)
}

/// Least-squares line through `(log t, log error)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("rate fit needs at least two points"));
    }
    if points.iter().any(|&(t, e)| !(t > 0.0 && e > 0.0 && t.is_finite() && e.is_finite())) {
        return Err(Error::InvalidInput("rate fit needs positive finite inputs"));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs at least two distinct t"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r2 })
}
