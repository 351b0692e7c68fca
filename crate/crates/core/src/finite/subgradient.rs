//! Projected subgradient descent on the sample dual.
//!
//! Steps follow a Polyak rule against a target level below the best value
//! seen so far. The level gap halves whenever progress stalls and is never
//! set below the weak-duality lower bound from the winner-take-all
//! allocation at the current iterate.

use alloc::vec;
use alloc::vec::Vec;

use super::compact::Compact;

/// Box known to contain the minimizer.
pub(crate) fn search_box(c: &Compact, quasi: bool) -> (Vec<f64>, Vec<f64>) {
    let vbar = c.mean_values();
    let total = c.total_budget();
    let b = &c.budgets;
    if quasi {
        let lo = (0..c.n).map(|i| b[i] / (vbar[i] + b[i])).collect();
        (lo, vec![1.0; c.n])
    } else {
        let lo = (0..c.n).map(|i| b[i] / vbar[i]).collect();
        let hi = (0..c.n).map(|i| total / vbar[i]).collect();
        (lo, hi)
    }
}

/// Primal objective of an allocation, shifted to the dual's scale, or
/// `None` if some buyer receives nothing.
pub(crate) fn primal_bound(c: &Compact, utilities: &[f64], quasi: bool) -> Option<f64> {
    let mut total = 0.0;
    for (&b, &u) in c.budgets.iter().zip(utilities) {
        let lb = libm::log(b);
        if quasi {
            // Best leftover for this utility is max(0, b − u).
            let delta = (b - u).max(0.0);
            if u + delta <= 0.0 {
                return None;
            }
            total += b * libm::log(u + delta) - delta - b * (lb - 1.0);
        } else {
            if u <= 0.0 {
                return None;
            }
            total += b * libm::log(u) - b * (lb - 1.0);
        }
    }
    Some(total)
}

fn winner_take_all_utilities(c: &Compact, beta: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; c.n];
    for j in 0..c.m() {
        let (_, w) = c.top(beta, j);
        u[w] += c.weight[j] * c.col(j)[w];
    }
    u
}

pub(crate) struct SubgradientResult {
    pub beta: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn projected_subgradient(
    c: &Compact,
    quasi: bool,
    max_iter: usize,
    gap_tol: f64,
) -> SubgradientResult {
    let (lo, hi) = search_box(c, quasi);
    let mut beta: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| libm::sqrt(l * h)).collect();
    let mut best = beta.clone();
    let mut best_f = c.dual_value(&beta);
    let mut lower = f64::NEG_INFINITY;
    let mut level_gap = 0.1 * best_f.abs().max(1.0);
    let mut anchor = best_f;
    let mut stall = 0usize;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let f = c.dual_value(&beta);
        if f < best_f {
            best_f = f;
            best.clone_from(&beta);
        }
        if let Some(l) = primal_bound(c, &winner_take_all_utilities(c, &beta), quasi) {
            lower = lower.max(l);
        }
        if best_f - lower <= gap_tol {
            break;
        }
        if anchor - best_f >= 0.5 * level_gap {
            anchor = best_f;
            stall = 0;
        } else {
            stall += 1;
            if stall > 30 {
                level_gap *= 0.5;
                beta.clone_from(&best);
                anchor = best_f;
                stall = 0;
                continue;
            }
        }
        if lower.is_finite() {
            level_gap = level_gap.min(best_f - lower);
        }
        let level = best_f - level_gap;
        let mut g = c.subgradient(&beta);
        // Drop components that would push further out of the box.
        for i in 0..c.n {
            if (beta[i] >= hi[i] && g[i] < 0.0) || (beta[i] <= lo[i] && g[i] > 0.0) {
                g[i] = 0.0;
            }
        }
        let norm2: f64 = g.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            break;
        }
        let step = (f - level).max(0.0) / norm2;
        for i in 0..c.n {
            beta[i] = (beta[i] - step * g[i]).clamp(lo[i], hi[i]);
        }
    }
    SubgradientResult { beta: best, iterations }
}
