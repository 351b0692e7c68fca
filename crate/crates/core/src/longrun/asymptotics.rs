//! Limiting variances of the sample equilibrium around the long-run one.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::envelope::{integral_linear, integral_square};
use super::{check_beta, envelope_at, envelope_hessian, linear_1d, LongRunEquilibrium};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::spec::LongRunSpec;

/// Variance of the equilibrium price, `∫ p*² − (∫ p*)²`.
pub fn sigma2_nsw(eq: &LongRunEquilibrium) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for s in &eq.price {
        m1 += integral_linear(s.slope, s.intercept, s.start, s.end);
        m2 += integral_square(s.slope, s.intercept, s.start, s.end);
    }
    (m2 - m1 * m1).max(0.0)
}

/// `(∫_{Θ_i} v_i, ∫_{Θ_i} v_i²)` from the price pieces won by buyer `i`.
fn won_moments(eq: &LongRunEquilibrium, buyer: usize) -> (f64, f64) {
    let b = eq.beta_star[buyer];
    let (mut m1, mut m2) = (0.0, 0.0);
    for s in eq.price.iter().filter(|s| s.buyer == buyer) {
        m1 += integral_linear(s.slope / b, s.intercept / b, s.start, s.end);
        m2 += integral_square(s.slope / b, s.intercept / b, s.start, s.end);
    }
    (m1, m2)
}

/// Variance of buyer `i`'s winning value `v_i(θ) 1{θ ∈ Θ_i*}`.
pub fn omega2(eq: &LongRunEquilibrium, buyer: usize) -> Result<f64> {
    if buyer >= eq.beta_star.len() {
        return Err(Error::DimensionMismatch("buyer index out of range"));
    }
    let (m1, m2) = won_moments(eq, buyer);
    Ok((m2 - m1 * m1).max(0.0))
}

/// Covariance of the winning-value vector, `δ_ij ∫_{Θ_i} v_i² − u_i u_j`.
///
/// Its diagonal is `Ω_i²`. The off-diagonal terms are nonzero because at
/// most one buyer wins each item.
pub fn score_covariance(eq: &LongRunEquilibrium) -> Matrix {
    let n = eq.beta_star.len();
    let moments: Vec<(f64, f64)> = (0..n).map(|i| won_moments(eq, i)).collect();
    Matrix::from_fn(n, n, |i, j| {
        let cross = -moments[i].0 * moments[j].0;
        if i == j {
            moments[i].1 + cross
        } else {
            cross
        }
    })
}

/// Hessian of the population dual at `β` for a one-dimensional linear spec
/// in which buyer `i` wins the `i`-th interval and every breakpoint is a
/// crossing of exactly two valuations.
pub fn hessian_longrun_linear(spec: &LongRunSpec, beta: &[f64]) -> Result<Matrix> {
    let (c, d) = linear_1d(spec)?;
    check_beta(spec.n, beta)?;
    let env = envelope_at(spec, beta)?;
    if env.seg_winner.len() != spec.n || env.seg_winner.iter().enumerate().any(|(k, &w)| k != w) {
        return Err(Error::NotTwiceDifferentiable("buyers do not win consecutive intervals in index order"));
    }
    for k in 1..spec.n {
        let a = env.breakpoints[k];
        let price = beta[k] * (c[k] * a + d[k]);
        let touching = (0..spec.n).filter(|&i| beta[i] * (c[i] * a + d[i]) >= price - 1e-12 * price.abs().max(1.0)).count();
        if touching > 2 {
            return Err(Error::NotTwiceDifferentiable("three or more valuations meet at a breakpoint"));
        }
    }
    let mut h = envelope_hessian(c, d, beta, &env);
    for i in 0..spec.n {
        h[(i, i)] += spec.budgets[i] / (beta[i] * beta[i]);
    }
    Ok(linalg::symmetrize(&h))
}

fn sandwich_pair(hessian: &Matrix, middle: &Matrix, beta: &[f64], budgets: &[f64]) -> Result<(Matrix, Matrix)> {
    let n = beta.len();
    if hessian.nrows() != n || hessian.ncols() != n || budgets.len() != n || middle.nrows() != n {
        return Err(Error::DimensionMismatch("asymptotic inputs disagree in size"));
    }
    let sigma_beta = linalg::sandwich(hessian, middle)?;
    let jac: Vec<f64> = (0..n).map(|i| -budgets[i] / (beta[i] * beta[i])).collect();
    let dm = linalg::diag(&jac);
    let sigma_u = linalg::symmetrize(&(&dm * &sigma_beta * &dm));
    Ok((sigma_beta, sigma_u))
}

/// `Σ_β = 𝓗⁻¹ Diag(Ω²) 𝓗⁻¹` and `Σ_u = D Σ_β D` with `D = Diag(−b_i/β_i²)`.
pub fn sigma_beta_u(hessian: &Matrix, omega2: &[f64], beta: &[f64], budgets: &[f64]) -> Result<(Matrix, Matrix)> {
    if omega2.len() != beta.len() {
        return Err(Error::DimensionMismatch("asymptotic inputs disagree in size"));
    }
    sandwich_pair(hessian, &linalg::diag(omega2), beta, budgets)
}

/// Sandwich covariances with the full covariance of the winning values in
/// place of its diagonal.
pub fn sigma_beta_u_from_score(
    hessian: &Matrix,
    score_cov: &Matrix,
    beta: &[f64],
    budgets: &[f64],
) -> Result<(Matrix, Matrix)> {
    sandwich_pair(hessian, score_cov, beta, budgets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPack {
    pub sigma2_nsw: f64,
    pub omega2: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    /// `𝓗⁻¹ Diag(Ω²) 𝓗⁻¹`.
    pub sigma_beta: Vec<Vec<f64>>,
    pub sigma_u: Vec<Vec<f64>>,
    /// Full covariance of the winning values.
    pub score_cov: Vec<Vec<f64>>,
    /// `𝓗⁻¹ Cov 𝓗⁻¹` with the full covariance.
    pub sigma_beta_full: Vec<Vec<f64>>,
    pub sigma_u_full: Vec<Vec<f64>>,
}

pub fn asymptotic_pack(spec: &LongRunSpec, eq: &LongRunEquilibrium) -> Result<AsymptoticPack> {
    let n = spec.n;
    let omega: Vec<f64> = (0..n).map(|i| omega2(eq, i)).collect::<Result<_>>()?;
    let hessian = hessian_longrun_linear(spec, &eq.beta_star)?;
    let (sb, su) = sigma_beta_u(&hessian, &omega, &eq.beta_star, &spec.budgets)?;
    let cov = score_covariance(eq);
    let (sbf, suf) = sigma_beta_u_from_score(&hessian, &cov, &eq.beta_star, &spec.budgets)?;
    Ok(AsymptoticPack {
        sigma2_nsw: sigma2_nsw(eq),
        omega2: omega,
        hessian: linalg::to_rows(&hessian),
        sigma_beta: linalg::to_rows(&sb),
        sigma_u: linalg::to_rows(&su),
        score_cov: linalg::to_rows(&cov),
        sigma_beta_full: linalg::to_rows(&sbf),
        sigma_u_full: linalg::to_rows(&suf),
    })
}
