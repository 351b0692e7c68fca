//! Newton's method on the entropy-smoothed sample dual.
//!
//! The item term `max_i β_i v_i` is replaced by `μ log Σ_i exp(β_i v_i / μ)`,
//! which is smooth, convex and within `μ log n` of the max. Minimizing for a
//! decreasing sequence of `μ` tracks the nonsmooth minimizer closely enough
//! for the exact active-set step to read off which bids tie.

use alloc::vec;
use alloc::vec::Vec;

use super::compact::Compact;
use crate::linalg::{self, Matrix};

/// Terms with `exp` arguments below this are treated as zero.
const EXP_CUTOFF: f64 = -40.0;

/// Newton decrement, relative to the objective, at which a stage stops.
const DECREMENT_TOL: f64 = 1e-14;

pub(crate) struct Eval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Matrix>,
}

pub(crate) fn evaluate(c: &Compact, beta: &[f64], mu: f64, with_hess: bool) -> Eval {
    let n = c.n;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = with_hess.then(|| Matrix::zeros(n, n));
    let mut active: Vec<(usize, f64)> = Vec::with_capacity(n);
    for j in 0..c.m() {
        let col = c.col(j);
        let w = c.weight[j];
        let (p, _) = c.top(beta, j);
        active.clear();
        let mut z = 0.0;
        for i in 0..n {
            let arg = (beta[i] * col[i] - p) / mu;
            if arg >= EXP_CUTOFF {
                let e = libm::exp(arg);
                z += e;
                active.push((i, e));
            }
        }
        value += w * (p + mu * libm::log(z));
        for a in active.iter_mut() {
            a.1 /= z;
            grad[a.0] += w * a.1 * col[a.0];
        }
        if let Some(h) = hess.as_mut() {
            let scale = w / mu;
            for &(i, si) in &active {
                let svi = si * col[i];
                h[(i, i)] += scale * svi * col[i];
                for &(k, sk) in &active {
                    h[(i, k)] -= scale * svi * sk * col[k];
                }
            }
        }
    }
    for i in 0..n {
        let b = c.budgets[i];
        value -= b * libm::log(beta[i]);
        grad[i] -= b / beta[i];
        if let Some(h) = hess.as_mut() {
            h[(i, i)] += b / (beta[i] * beta[i]);
        }
    }
    Eval { value, grad, hess }
}

/// Softmax allocation of the smoothed problem, item-major.
pub(crate) fn soft_allocation(c: &Compact, beta: &[f64], mu: f64) -> Vec<f64> {
    let n = c.n;
    let mut alloc = vec![0.0; c.m() * n];
    for j in 0..c.m() {
        let col = c.col(j);
        let (p, _) = c.top(beta, j);
        let x = &mut alloc[j * n..(j + 1) * n];
        let mut z = 0.0;
        for i in 0..n {
            let arg = (beta[i] * col[i] - p) / mu;
            if arg >= EXP_CUTOFF {
                x[i] = libm::exp(arg);
                z += x[i];
            }
        }
        x.iter_mut().for_each(|v| *v *= c.weight[j] / z);
    }
    alloc
}

/// Minimizes the smoothed dual at fixed `μ` starting from `beta`, keeping
/// `β ≤ 1` when `quasi`. Returns the number of Newton steps taken.
pub(crate) fn newton_stage(c: &Compact, beta: &mut [f64], mu: f64, quasi: bool) -> usize {
    let n = c.n;
    let mut steps = 0;
    for _ in 0..60 {
        let cur = evaluate(c, beta, mu, true);
        let hess = cur.hess.expect("hessian requested");
        let free: Vec<usize> = (0..n).filter(|&i| !(quasi && beta[i] >= 1.0 && cur.grad[i] <= 0.0)).collect();
        if free.is_empty() {
            break;
        }
        let k = free.len();
        let mut hf = Matrix::from_fn(k, k, |a, b| hess[(free[a], free[b])]);
        let rhs: Vec<f64> = free.iter().map(|&i| -cur.grad[i]).collect();
        let mut dir = linalg::solve_spd(&hf, &rhs);
        if dir.is_none() {
            let ridge = 1e-12 * (0..k).map(|a| hf[(a, a)]).fold(0.0, f64::max);
            for a in 0..k {
                hf[(a, a)] += ridge;
            }
            dir = linalg::solve_spd(&hf, &rhs);
        }
        let Some(dir) = dir else { break };
        let mut d = vec![0.0; n];
        for (a, &i) in free.iter().enumerate() {
            d[i] = dir[a];
        }
        let mut trial = vec![0.0; n];
        let rel = (0..n).map(|i| (d[i] / beta[i]).abs()).fold(0.0, f64::max);
        if rel <= 1e-15 {
            break;
        }
        // Below this Newton decrement the predicted decrease is lost in the
        // rounding of the objective, so take the full step and stop.
        let decrement: f64 = rhs.iter().zip(&dir).map(|(g, x)| g * x).sum();
        if decrement <= DECREMENT_TOL * (1.0 + cur.value.abs()) {
            let mut ok = true;
            for i in 0..n {
                let mut x = beta[i] + d[i];
                if quasi {
                    x = x.min(1.0);
                }
                ok &= x > 0.0;
                trial[i] = x;
            }
            if ok {
                beta.copy_from_slice(&trial);
                steps += 1;
            }
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut ok = true;
            for i in 0..n {
                let mut x = beta[i] + alpha * d[i];
                if quasi {
                    x = x.min(1.0);
                }
                if x <= 0.0 {
                    ok = false;
                    break;
                }
                trial[i] = x;
            }
            if ok {
                let slope: f64 = (0..n).map(|i| cur.grad[i] * (trial[i] - beta[i])).sum();
                let f = evaluate(c, &trial, mu, false).value;
                if f <= cur.value + 1e-4 * slope {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        beta.copy_from_slice(&trial);
        steps += 1;
        if rel <= 1e-13 && alpha == 1.0 {
            break;
        }
    }
    steps
}
