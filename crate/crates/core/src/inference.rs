//! Estimators and confidence intervals built from one observed equilibrium.
//!
//! All variance estimators are plug-in versions of the limiting variances:
//! the price variance for the Nash social welfare, the per-buyer variance of
//! winning values `Ω_i²`, and a finite-difference Hessian of the sample dual.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::FiniteEquilibrium;
use crate::linalg::{self, Matrix};
use crate::market::{dual_value_sample, FiniteMarket};
use crate::stats::normal_quantile;

/// Negative variance estimates above this are rounding and clamp to zero.
pub const NEGATIVE_VARIANCE_CLAMP: f64 = -1e-10;

/// Shares below this fraction of an item's supply do not count as a split.
const SPLIT_FRACTION: f64 = 1e-9;

fn clamp_variance(v: f64) -> Result<f64> {
    if v.is_nan() {
        return Err(Error::InvalidInput("variance estimate is NaN"));
    }
    if v < NEGATIVE_VARIANCE_CLAMP {
        return Err(Error::NegativeVariance(v));
    }
    Ok(v.max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput("alpha must lie in (0, 1)"))
    }
}

/// Two-sided normal critical value `z_{α/2}`.
pub fn z_critical(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

/// Price variance `(1/t) Σ p_τ² − ((1/t) Σ p_τ)²`.
///
/// With unit total budget the mean price is one, so this equals the mean
/// squared price minus one.
pub fn estimate_sigma2_nsw(prices: &[f64]) -> Result<f64> {
    if prices.is_empty() {
        return Err(Error::NoItems);
    }
    if prices.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidInput("prices must be nonnegative and finite"));
    }
    let t = prices.len() as f64;
    let m1 = prices.iter().sum::<f64>() / t;
    let m2 = prices.iter().map(|p| p * p).sum::<f64>() / t;
    clamp_variance(m2 - m1 * m1)
}

/// `nsw_hat ± z_{α/2} σ̂ / √t`.
pub fn ci_nsw(nsw_hat: f64, sigma2_hat: f64, t: usize, alpha: f64) -> Result<(f64, f64)> {
    if t < 2 {
        return Err(Error::InvalidInput("confidence intervals need t >= 2"));
    }
    if !(sigma2_hat >= 0.0) {
        return Err(Error::NegativeVariance(sigma2_hat));
    }
    let half = z_critical(alpha)? * libm::sqrt(sigma2_hat / t as f64);
    Ok((nsw_hat - half, nsw_hat + half))
}

/// Per-item utilities `u_i^τ = x_i^τ v_i(θ^τ)`, buyer-major.
fn item_utilities(market: &FiniteMarket, eq: &FiniteEquilibrium) -> Result<Vec<Vec<f64>>> {
    let (n, t) = (market.n(), market.t());
    if eq.beta.len() != n {
        return Err(Error::DimensionMismatch("equilibrium and market differ in n"));
    }
    let mut u = vec![vec![0.0; t]; n];
    for s in &eq.x {
        if s.buyer >= n || s.item >= t {
            return Err(Error::DimensionMismatch("allocation refers to a missing buyer or item"));
        }
        u[s.buyer][s.item] += s.amount * market.value(s.buyer, s.item);
    }
    Ok(u)
}

/// Number of items held in positive amounts by two or more buyers.
pub fn count_split_items(market: &FiniteMarket, eq: &FiniteEquilibrium) -> usize {
    let threshold = SPLIT_FRACTION * market.supply();
    let t = market.t();
    let mut holders = vec![0u32; t];
    for s in eq.x.iter().filter(|s| s.amount > threshold && s.item < t) {
        holders[s.item] += 1;
    }
    holders.iter().filter(|&&h| h > 1).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omega2Estimate {
    pub omega2: Vec<f64>,
    /// Items split between buyers. The estimator assumes none are.
    pub split_items: usize,
}

impl Omega2Estimate {
    pub fn tie_flag(&self) -> bool {
        self.split_items > 0
    }
}

/// `Ω̂_i² = (1/t) Σ_τ (t u_i^τ − u_i)²` with `u_i = Σ_τ u_i^τ`.
pub fn estimate_omega2(market: &FiniteMarket, eq: &FiniteEquilibrium) -> Result<Omega2Estimate> {
    let per_item = item_utilities(market, eq)?;
    let t = market.t() as f64;
    let omega2 = per_item
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter().map(|x| (t * x - total) * (t * x - total)).sum::<f64>() / t
        })
        .collect();
    Ok(Omega2Estimate { omega2, split_items: count_split_items(market, eq) })
}

/// Full covariance of the winning values,
/// `(1/t) Σ_τ (t u_i^τ − u_i)(t u_j^τ − u_j)`. Its diagonal is `Ω̂²`.
pub fn estimate_score_covariance(market: &FiniteMarket, eq: &FiniteEquilibrium) -> Result<Matrix> {
    let per_item = item_utilities(market, eq)?;
    let t = market.t() as f64;
    let totals: Vec<f64> = per_item.iter().map(|r| r.iter().sum()).collect();
    let n = per_item.len();
    Ok(Matrix::from_fn(n, n, |i, j| {
        per_item[i]
            .iter()
            .zip(&per_item[j])
            .map(|(a, b)| (t * a - totals[i]) * (t * b - totals[j]))
            .sum::<f64>()
            / t
    }))
}

/// Default smoothing `η_t = t^{-1/4}`.
pub fn default_eta(t: usize) -> f64 {
    libm::pow(t as f64, -0.25)
}

/// Largest smoothing kept by [`feasible_eta`], as a fraction of `min β`.
pub const ETA_SHRINK_FRACTION: f64 = 0.25;

/// `eta` when every perturbation `β ± η(e_i ± e_j)` stays positive with
/// margin, otherwise `ETA_SHRINK_FRACTION · min β`.
pub fn feasible_eta(beta: &[f64], eta: f64) -> f64 {
    let min = beta.iter().copied().fold(f64::INFINITY, f64::min);
    eta.min(ETA_SHRINK_FRACTION * min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumDiffHessian {
    pub hessian: Matrix,
    pub eta: f64,
}

/// Central-difference Hessian of the sample dual,
/// `[H(β+η(e_i+e_j)) − H(β+η(e_j−e_i)) − H(β+η(e_i−e_j)) + H(β−η(e_i+e_j))] / (4η²)`,
/// symmetrized.
pub fn hessian_numdiff(market: &FiniteMarket, beta: &[f64], eta: f64) -> Result<Matrix> {
    let n = market.n();
    if beta.len() != n {
        return Err(Error::DimensionMismatch("beta length differs from n"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput("eta must be positive and finite"));
    }
    for (buyer, &b) in beta.iter().enumerate() {
        if !(b - 2.0 * eta > 0.0) {
            return Err(Error::NonPositiveMultiplier { buyer, value: b - 2.0 * eta });
        }
    }
    let eval = |si: f64, i: usize, sj: f64, j: usize| -> Result<f64> {
        let mut x = beta.to_vec();
        x[i] += si * eta;
        x[j] += sj * eta;
        dual_value_sample(market, &x)
    };
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (eval(1.0, i, 1.0, j)? - eval(-1.0, i, 1.0, j)? - eval(1.0, i, -1.0, j)?
                + eval(-1.0, i, -1.0, j)?)
                / (4.0 * eta * eta);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(linalg::symmetrize(&h))
}

/// [`hessian_numdiff`] after shrinking `eta` into the feasible range.
pub fn hessian_numdiff_auto(market: &FiniteMarket, beta: &[f64], eta: f64) -> Result<NumDiffHessian> {
    let eta = feasible_eta(beta, eta);
    Ok(NumDiffHessian { hessian: hessian_numdiff(market, beta, eta)?, eta })
}

/// Hessian used by the sandwich covariance.
#[derive(Clone, Copy, Debug)]
pub enum HessianInput<'a> {
    Matrix(&'a Matrix),
    /// Items are won without ties near equilibrium, so the Hessian is
    /// `Diag(b_i/β_i²)` and `Σ_β = Diag(Ω_i² β_i⁴ / b_i²)`.
    IntDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(center: f64, half_width: f64) -> Self {
        Interval { lo: center - half_width, hi: center + half_width }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaUIntervals {
    pub beta_ci: Vec<Interval>,
    pub u_ci: Vec<Interval>,
    pub sigma_beta: Matrix,
    pub sigma_u: Matrix,
}

/// Intervals `β̂_i ± z_{α/2} √(Σ̂_β,ii / t)` and the same for `u = b/β` with
/// `Σ̂_u = D Σ̂_β D`, `D = Diag(b_i/β̂_i²)`.
pub fn ci_beta_u(
    beta_hat: &[f64],
    omega2_hat: &[f64],
    hessian: HessianInput<'_>,
    budgets: &[f64],
    t: usize,
    alpha: f64,
) -> Result<BetaUIntervals> {
    let n = beta_hat.len();
    if omega2_hat.len() != n || budgets.len() != n {
        return Err(Error::DimensionMismatch("inference inputs disagree in size"));
    }
    if t < 2 {
        return Err(Error::InvalidInput("confidence intervals need t >= 2"));
    }
    if let Some(&w) = omega2_hat.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::NegativeVariance(w));
    }
    let z = z_critical(alpha)?;
    let sigma_beta = match hessian {
        HessianInput::Matrix(h) => {
            if h.nrows() != n || h.ncols() != n {
                return Err(Error::DimensionMismatch("hessian size differs from n"));
            }
            if !linalg::is_positive_definite(h) {
                return Err(Error::SingularMatrix);
            }
            linalg::sandwich(h, &linalg::diag(omega2_hat))?
        }
        HessianInput::IntDiagonal => {
            let d: Vec<f64> = (0..n)
                .map(|i| omega2_hat[i] * libm::pow(beta_hat[i], 4.0) / (budgets[i] * budgets[i]))
                .collect();
            linalg::diag(&d)
        }
    };
    let jac: Vec<f64> = (0..n).map(|i| budgets[i] / (beta_hat[i] * beta_hat[i])).collect();
    let dm = linalg::diag(&jac);
    let sigma_u = linalg::symmetrize(&(&dm * &sigma_beta * &dm));
    let tf = t as f64;
    let half = |m: &Matrix, i: usize| z * libm::sqrt(m[(i, i)].max(0.0) / tf);
    let beta_ci = (0..n).map(|i| Interval::around(beta_hat[i], half(&sigma_beta, i))).collect();
    let u_ci = (0..n)
        .map(|i| Interval::around(budgets[i] / beta_hat[i], half(&sigma_u, i)))
        .collect();
    Ok(BetaUIntervals { beta_ci, u_ci, sigma_beta, sigma_u })
}

/// Hessian used for the `β` and `u` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HessianMode {
    IntDiagonal,
    /// Finite differences with `η = t^{-1/4}` unless given.
    NumDiff { eta: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub t: usize,
    pub alpha: f64,
    pub nsw_hat: f64,
    pub sigma2_nsw_hat: f64,
    pub nsw_ci: Interval,
    pub beta_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub omega2_hat: Vec<f64>,
    pub hessian_hat: Option<Vec<Vec<f64>>>,
    /// Smoothing actually used by the numerical Hessian.
    pub eta: Option<f64>,
    pub beta_ci: Vec<Interval>,
    pub u_ci: Vec<Interval>,
    pub rev_hat: Option<f64>,
    /// Items split between buyers in the observed allocation.
    pub split_items: usize,
}

/// Point estimates, variance estimates and intervals for a linear market.
pub fn infer(market: &FiniteMarket, eq: &FiniteEquilibrium, mode: HessianMode, alpha: f64) -> Result<InferenceReport> {
    let t = market.t();
    let sigma2 = estimate_sigma2_nsw(&eq.p)?;
    let (lo, hi) = ci_nsw(eq.nsw, sigma2, t, alpha)?;
    let omega = estimate_omega2(market, eq)?;
    let (hessian, eta) = match mode {
        HessianMode::IntDiagonal => (None, None),
        HessianMode::NumDiff { eta } => {
            let h = hessian_numdiff_auto(market, &eq.beta, eta.unwrap_or_else(|| default_eta(t)))?;
            (Some(h.hessian), Some(h.eta))
        }
    };
    let input = hessian.as_ref().map_or(HessianInput::IntDiagonal, HessianInput::Matrix);
    let cis = ci_beta_u(&eq.beta, &omega.omega2, input, market.budgets(), t, alpha)?;
    Ok(InferenceReport {
        t,
        alpha,
        nsw_hat: eq.nsw,
        sigma2_nsw_hat: sigma2,
        nsw_ci: Interval { lo, hi },
        beta_hat: eq.beta.clone(),
        u_hat: eq.u.clone(),
        omega2_hat: omega.omega2,
        hessian_hat: hessian.as_ref().map(linalg::to_rows),
        eta,
        beta_ci: cis.beta_ci,
        u_ci: cis.u_ci,
        rev_hat: None,
        split_items: omega.split_items,
    })
}
