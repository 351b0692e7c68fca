//! First-order condition residuals of a reported equilibrium.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FiniteEquilibrium, QuasiFiniteEquilibrium, Share};
use crate::error::{Error, Result};
use crate::market::FiniteMarket;

/// Read access shared by linear and quasilinear equilibria.
pub trait MarketOutcome {
    fn beta(&self) -> &[f64];
    fn prices(&self) -> &[f64];
    fn shares(&self) -> &[Share];
    /// Unspent budgets; `None` for linear buyers.
    fn leftover(&self) -> Option<&[f64]>;
}

impl MarketOutcome for FiniteEquilibrium {
    fn beta(&self) -> &[f64] {
        &self.beta
    }
    fn prices(&self) -> &[f64] {
        &self.p
    }
    fn shares(&self) -> &[Share] {
        &self.x
    }
    fn leftover(&self) -> Option<&[f64]> {
        None
    }
}

impl MarketOutcome for QuasiFiniteEquilibrium {
    fn beta(&self) -> &[f64] {
        &self.beta
    }
    fn prices(&self) -> &[f64] {
        &self.p
    }
    fn shares(&self) -> &[Share] {
        &self.x
    }
    fn leftover(&self) -> Option<&[f64]> {
        Some(&self.leftover)
    }
}

/// Residual magnitudes of the equilibrium conditions. All entries are
/// nonnegative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `|⟨p, s − Σ_i x_i⟩|`.
    pub clearance: f64,
    /// `⟨p − β_i v_i, x_i⟩` for each buyer.
    pub winner: Vec<f64>,
    /// `|u_i(x) − b_i/β_i|`, or `|u_i(x) + δ_i − b_i/β_i|` with leftovers.
    pub utility_identity: Vec<f64>,
    /// Largest deviation of an item's allocated total from its supply, or
    /// largest negative share.
    pub feasibility: f64,
    /// `max_τ |p_τ − max_i β_i v_iτ|`.
    pub price_consistency: f64,
    /// `δ_i (1 − β_i)` and any excess of `β_i` over one, for quasilinear
    /// buyers.
    pub complementarity: Option<Vec<f64>>,
    pub tol: f64,
    pub passed: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        let mut m = self.clearance.max(self.feasibility).max(self.price_consistency);
        for v in self.winner.iter().chain(&self.utility_identity) {
            m = m.max(*v);
        }
        if let Some(c) = &self.complementarity {
            m = c.iter().fold(m, |a, v| a.max(*v));
        }
        m
    }
}

pub fn verify_kkt<E: MarketOutcome + ?Sized>(market: &FiniteMarket, eq: &E, tol: f64) -> Result<KktReport> {
    let n = market.n();
    let t = market.t();
    let beta = eq.beta();
    let prices = eq.prices();
    if beta.len() != n {
        return Err(Error::DimensionMismatch("beta length differs from buyer count"));
    }
    if prices.len() != t {
        return Err(Error::DimensionMismatch("price length differs from item count"));
    }
    if let Some(d) = eq.leftover() {
        if d.len() != n {
            return Err(Error::DimensionMismatch("leftover length differs from buyer count"));
        }
    }
    if beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidInput("multipliers must be positive and finite"));
    }
    let supply = market.supply();
    let mut allocated = vec![0.0; t];
    let mut utility = vec![0.0; n];
    let mut winner = vec![0.0; n];
    let mut negative: f64 = 0.0;
    for s in eq.shares() {
        if s.item >= t || s.buyer >= n {
            return Err(Error::DimensionMismatch("share refers to a missing item or buyer"));
        }
        let v = market.value(s.buyer, s.item);
        allocated[s.item] += s.amount;
        utility[s.buyer] += v * s.amount;
        winner[s.buyer] += (prices[s.item] - beta[s.buyer] * v) * s.amount;
        negative = negative.max(-s.amount);
    }
    let mut clearance = 0.0;
    let mut feasibility = negative;
    let mut price_consistency: f64 = 0.0;
    for item in 0..t {
        clearance += prices[item] * (supply - allocated[item]);
        feasibility = feasibility.max((allocated[item] - supply).abs());
        let top = (0..n).map(|i| beta[i] * market.value(i, item)).fold(f64::NEG_INFINITY, f64::max);
        price_consistency = price_consistency.max((prices[item] - top).abs());
    }
    let leftover = eq.leftover();
    let utility_identity = (0..n)
        .map(|i| {
            let d = leftover.map_or(0.0, |d| d[i]);
            (utility[i] + d - market.budgets()[i] / beta[i]).abs()
        })
        .collect();
    let complementarity = leftover.map(|d| {
        (0..n).map(|i| (d[i] * (1.0 - beta[i])).abs().max(beta[i] - 1.0).max(-d[i])).collect()
    });
    let mut report = KktReport {
        clearance: clearance.abs(),
        winner: winner.into_iter().map(f64::abs).collect(),
        utility_identity,
        feasibility,
        price_consistency,
        complementarity,
        tol,
        passed: false,
    };
    report.passed = report.max_residual() <= tol;
    Ok(report)
}
