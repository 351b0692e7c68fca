//! Long-run equilibria of one-dimensional linear markets.
//!
//! With `v_i(θ) = c_i θ + d_i` and items uniform on `[0, 1]`, the population
//! dual `H(β) = ∫ max_i β_i v_i(θ) dθ − Σ_i b_i log β_i` is an integral of a
//! piecewise-linear envelope, so its value, gradient and (away from
//! degenerate breakpoints) Hessian have closed forms.

mod asymptotics;
mod envelope;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::market::log_barrier;
use crate::spec::{LongRunSpec, Supply};

pub use asymptotics::{
    asymptotic_pack, hessian_longrun_linear, omega2, score_covariance, sigma2_nsw, sigma_beta_u,
    sigma_beta_u_from_score, AsymptoticPack,
};
pub use envelope::{integral_linear, integral_square, upper_envelope, Envelope, MIN_SEGMENT};

/// One linear piece of the equilibrium price `p*(θ) = slope·θ + intercept`
/// on `[start, end]`, won by `buyer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSegment {
    pub start: f64,
    pub end: f64,
    pub slope: f64,
    pub intercept: f64,
    pub buyer: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRunEquilibrium {
    pub beta_star: Vec<f64>,
    pub budgets: Vec<f64>,
    /// Envelope breakpoints at `β*`; for linear buyers ordered by intercept
    /// these are `0 = a_0 < a_1 < … < a_n = 1` with buyer `i` on `[a_i, a_{i+1}]`.
    pub breakpoints: Vec<f64>,
    pub u_star: Vec<f64>,
    pub nsw_star: f64,
    pub price: Vec<PriceSegment>,
    /// Sup-norm of the (projected) dual gradient at `β*`.
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLongRunEquilibrium {
    pub equilibrium: LongRunEquilibrium,
    pub leftover: Vec<f64>,
    pub rev: f64,
}

/// Exact gradient of the population dual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopGradient {
    pub grad: Vec<f64>,
    /// False when two scaled valuations coincide on a segment of positive
    /// length; `grad` is then the lowest-index subgradient.
    pub differentiable: bool,
}

pub(crate) fn linear_1d(spec: &LongRunSpec) -> Result<(&[f64], &[f64])> {
    match (spec.linear_1d_coefficients(), &spec.supply) {
        (Some(cd), Supply::Uniform01) => Ok(cd),
        _ => Err(Error::NotLinear1D),
    }
}

fn check_beta(n: usize, beta: &[f64]) -> Result<()> {
    if beta.len() != n {
        return Err(Error::DimensionMismatch("beta length differs from buyer count"));
    }
    for (i, &b) in beta.iter().enumerate() {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::NonPositiveMultiplier { buyer: i, value: b });
        }
    }
    Ok(())
}

/// Scaled lines `β_i v_i` as `(slope, intercept)` pairs.
fn scaled_lines(c: &[f64], d: &[f64], beta: &[f64]) -> Vec<(f64, f64)> {
    (0..beta.len()).map(|i| (beta[i] * c[i], beta[i] * d[i])).collect()
}

pub(crate) fn envelope_at(spec: &LongRunSpec, beta: &[f64]) -> Result<Envelope> {
    let (c, d) = linear_1d(spec)?;
    check_beta(spec.n, beta)?;
    Ok(upper_envelope(&scaled_lines(c, d, beta)))
}

/// `∫_{Θ_i(β)} v_i` for every buyer.
fn won_values(c: &[f64], d: &[f64], env: &Envelope) -> Vec<f64> {
    let mut u = vec![0.0; c.len()];
    for (l, r, w) in env.segments() {
        u[w] += integral_linear(c[w], d[w], l, r);
    }
    u
}

/// Population dual `H(β)`.
pub fn dual_value_pop(spec: &LongRunSpec, beta: &[f64]) -> Result<f64> {
    let (c, d) = linear_1d(spec)?;
    let env = envelope_at(spec, beta)?;
    let revenue: f64 = env.segments().map(|(l, r, w)| beta[w] * integral_linear(c[w], d[w], l, r)).sum();
    Ok(revenue - log_barrier(&spec.budgets, beta))
}

/// Gradient `∫_{Θ_i(β)} v_i − b_i/β_i` of the population dual.
pub fn dual_grad_pop(spec: &LongRunSpec, beta: &[f64]) -> Result<PopGradient> {
    let (c, d) = linear_1d(spec)?;
    let env = envelope_at(spec, beta)?;
    let lines = scaled_lines(c, d, beta);
    let mut differentiable = true;
    for (_, _, w) in env.segments() {
        let (sw, rw) = lines[w];
        let scale = sw.abs().max(rw.abs()).max(f64::MIN_POSITIVE);
        if lines
            .iter()
            .enumerate()
            .any(|(k, &(s, r))| k != w && (s - sw).abs() <= 1e-14 * scale && (r - rw).abs() <= 1e-14 * scale)
        {
            differentiable = false;
        }
    }
    let u = won_values(c, d, &env);
    let grad = (0..spec.n).map(|i| u[i] - spec.budgets[i] / beta[i]).collect();
    Ok(PopGradient { grad, differentiable })
}

/// Hessian of the envelope integral assembled from breakpoint sensitivities,
/// valid wherever every breakpoint is a simple crossing of two lines.
pub(crate) fn envelope_hessian(c: &[f64], d: &[f64], beta: &[f64], env: &Envelope) -> Matrix {
    let n = beta.len();
    let mut h = Matrix::zeros(n, n);
    for k in 1..env.seg_winner.len() {
        let a = env.breakpoints[k];
        let (w, w2) = (env.seg_winner[k - 1], env.seg_winner[k]);
        let denom = (beta[w] * c[w] - beta[w2] * c[w2]).abs();
        if denom == 0.0 {
            continue;
        }
        let (vw, vw2) = (c[w] * a + d[w], c[w2] * a + d[w2]);
        h[(w, w)] += vw * vw / denom;
        h[(w2, w2)] += vw2 * vw2 / denom;
        h[(w, w2)] -= vw * vw2 / denom;
        h[(w2, w)] -= vw * vw2 / denom;
    }
    h
}

fn full_hessian(spec: &LongRunSpec, c: &[f64], d: &[f64], beta: &[f64], env: &Envelope) -> Matrix {
    let mut h = envelope_hessian(c, d, beta, env);
    for i in 0..spec.n {
        h[(i, i)] += spec.budgets[i] / (beta[i] * beta[i]);
    }
    h
}

const MAX_NEWTON: usize = 500;

fn gradient(spec: &LongRunSpec, c: &[f64], d: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    let u = won_values(c, d, &envelope_at(spec, beta)?);
    Ok((0..spec.n).map(|i| u[i] - spec.budgets[i] / beta[i]).collect())
}

/// Damped (projected when `quasi`) Newton on the population dual, certified
/// by the sup-norm of the projected gradient.
pub(crate) fn minimize(
    spec: &LongRunSpec,
    tol: f64,
    quasi: bool,
    start: Option<&[f64]>,
) -> Result<(Vec<f64>, f64, usize)> {
    let (c, d) = linear_1d(spec)?;
    let n = spec.n;
    let mut beta: Vec<f64> = match start {
        Some(s) => {
            check_beta(n, s)?;
            s.to_vec()
        }
        None => spec.budgets.clone(),
    };
    if quasi {
        beta.iter_mut().for_each(|b| *b = b.min(1.0));
    }
    let projected = |beta: &[f64], g: &[f64]| -> Vec<f64> {
        (0..n).map(|i| if quasi && beta[i] >= 1.0 && g[i] <= 0.0 { 0.0 } else { g[i] }).collect()
    };
    let mut best = f64::INFINITY;
    for iter in 0..MAX_NEWTON {
        let env = envelope_at(spec, &beta)?;
        let g = gradient(spec, c, d, &beta)?;
        let pg = projected(&beta, &g);
        let norm = pg.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        best = best.min(norm);
        if norm <= tol {
            return Ok((beta, norm, iter));
        }
        let free: Vec<usize> = (0..n).filter(|&i| pg[i] != 0.0 || !(quasi && beta[i] >= 1.0)).collect();
        let h = full_hessian(spec, c, d, &beta, &env);
        let hf = Matrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
        let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        let newton = linalg::solve_spd(&hf, &rhs);
        let f0 = dual_value_pop(spec, &beta)?;
        let mut moved = false;
        let directions: Vec<Vec<f64>> = {
            let mut dirs = Vec::new();
            if let Some(step) = newton {
                let mut dir = vec![0.0; n];
                for (a, &i) in free.iter().enumerate() {
                    dir[i] = step[a];
                }
                dirs.push(dir);
            }
            dirs.push(pg.iter().map(|x| -x).collect());
            dirs
        };
        for dir in directions {
            let mut alpha = 1.0;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..n)
                    .map(|i| {
                        let x = beta[i] + alpha * dir[i];
                        if quasi {
                            x.min(1.0)
                        } else {
                            x
                        }
                    })
                    .collect();
                if trial.iter().all(|&x| x > 0.0) {
                    let slope: f64 = (0..n).map(|i| g[i] * (trial[i] - beta[i])).sum();
                    // Near the minimizer decreases in H drop below rounding,
                    // so a full step that shrinks the gradient is accepted too.
                    let shrinks = alpha == 1.0 && {
                        let gt = gradient(spec, c, d, &trial)?;
                        projected(&trial, &gt).iter().fold(0.0f64, |m, x| m.max(x.abs())) < 0.5 * norm
                    };
                    if shrinks || dual_value_pop(spec, &trial)? <= f0 + 1e-4 * slope {
                        beta = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    let g = gradient(spec, c, d, &beta)?;
    let norm = projected(&beta, &g).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm <= tol {
        Ok((beta, norm, MAX_NEWTON))
    } else {
        Err(Error::NotConverged { residual: norm.min(best) })
    }
}

fn assemble(spec: &LongRunSpec, beta: Vec<f64>, grad_norm: f64, iterations: usize) -> Result<LongRunEquilibrium> {
    let (c, d) = linear_1d(spec)?;
    let env = envelope_at(spec, &beta)?;
    let u_star = won_values(c, d, &env);
    let nsw_star = spec.budgets.iter().zip(&u_star).map(|(b, u)| b * libm::log(*u)).sum();
    let price = env
        .segments()
        .map(|(start, end, w)| PriceSegment { start, end, slope: beta[w] * c[w], intercept: beta[w] * d[w], buyer: w })
        .collect();
    Ok(LongRunEquilibrium {
        beta_star: beta,
        budgets: spec.budgets.clone(),
        breakpoints: env.breakpoints,
        u_star,
        nsw_star,
        price,
        grad_norm,
        iterations,
    })
}

impl LongRunEquilibrium {
    /// `p*(θ)`.
    pub fn price_at(&self, theta: f64) -> f64 {
        let k = self.price.partition_point(|s| s.end < theta).min(self.price.len() - 1);
        let s = &self.price[k];
        s.slope * theta + s.intercept
    }

    /// `∫ p* dθ`.
    pub fn revenue(&self) -> f64 {
        self.price.iter().map(|s| integral_linear(s.slope, s.intercept, s.start, s.end)).sum()
    }
}

/// Long-run equilibrium of linear buyers.
///
/// Requires a normalized one-dimensional linear spec whose intercepts
/// strictly decrease with the buyer index, so that buyer `i` wins the `i`-th
/// interval from the left.
pub fn solve_longrun_eg(spec: &LongRunSpec, tol: f64) -> Result<LongRunEquilibrium> {
    linear_1d(spec)?;
    if !spec.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if !spec.intercepts_strictly_decreasing() {
        return Err(Error::InterceptsNotDecreasing);
    }
    let (beta, norm, iters) = minimize(spec, tol, false, None)?;
    assemble(spec, beta, norm, iters)
}

/// Long-run equilibrium of quasilinear buyers, minimizing `H` over
/// `0 < β ≤ 1`. Budgets need not sum to one; values must have unit mean.
pub fn solve_longrun_qeg(spec: &LongRunSpec, tol: f64) -> Result<QuasiLongRunEquilibrium> {
    linear_1d(spec)?;
    if !spec.values_normalized() {
        return Err(Error::NotNormalized);
    }
    let (beta, norm, iters) = minimize(spec, tol, true, None)?;
    let eq = assemble(spec, beta, norm, iters)?;
    let leftover = (0..spec.n)
        .map(|i| {
            let delta = spec.budgets[i] - eq.beta_star[i] * eq.u_star[i];
            if delta <= 1e-12 * spec.budgets[i].max(1.0) {
                0.0
            } else {
                delta
            }
        })
        .collect();
    let rev = eq.revenue();
    Ok(QuasiLongRunEquilibrium { equilibrium: eq, leftover, rev })
}
