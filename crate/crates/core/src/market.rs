//! Observed (finite) markets and the sample dual objective
//! `H_t(β) = (1/t) Σ_τ max_i β_i v_i(θ^τ) − Σ_i b_i log β_i`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` buyers and `t` items with supply `1/t` each. Values are stored
/// row-major, one row per buyer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMarket {
    n: usize,
    t: usize,
    values: Vec<f64>,
    budgets: Vec<f64>,
    seed: Option<u64>,
}

impl FiniteMarket {
    pub fn from_parts(
        n: usize,
        t: usize,
        values: Vec<f64>,
        budgets: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if t == 0 {
            return Err(Error::NoItems);
        }
        if n == 0 {
            return Err(Error::InvalidInput("market needs at least one buyer"));
        }
        if values.len() != n * t {
            return Err(Error::DimensionMismatch("value matrix is not n x t"));
        }
        if budgets.len() != n {
            return Err(Error::DimensionMismatch("budgets length differs from n"));
        }
        for (buyer, &b) in budgets.iter().enumerate() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::NonPositiveBudget { buyer, value: b });
            }
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("item values must be finite and nonnegative"));
        }
        Ok(FiniteMarket { n, t, values, budgets, seed })
    }

    /// Builds a market from one row of item values per buyer.
    pub fn from_rows(rows: &[Vec<f64>], budgets: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::DimensionMismatch("rows have different lengths"));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_parts(n, t, values, budgets, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-item supply `1/t`.
    pub fn supply(&self) -> f64 {
        1.0 / self.t as f64
    }

    #[inline]
    pub fn value(&self, buyer: usize, item: usize) -> f64 {
        self.values[buyer * self.t + item]
    }

    pub fn row(&self, buyer: usize) -> &[f64] {
        &self.values[buyer * self.t..(buyer + 1) * self.t]
    }

    /// Values of all buyers for one item.
    pub fn item_values(&self, item: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, item)).collect()
    }

    /// Sample mean value `v̄_i^t` of every buyer.
    pub fn mean_values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().sum::<f64>() / self.t as f64)
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// Same items, different budgets.
    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.n, self.t, self.values.clone(), budgets, self.seed)
    }

    /// Prices `p_τ = max_i β_i v_i(θ^τ)`.
    pub fn prices(&self, beta: &[f64]) -> Vec<f64> {
        let mut best = vec![0.0f64; self.t];
        for (i, &b) in beta.iter().enumerate() {
            for (p, &v) in best.iter_mut().zip(self.row(i)) {
                *p = p.max(b * v);
            }
        }
        best
    }

    pub(crate) fn check_multipliers(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.n {
            return Err(Error::DimensionMismatch("beta length differs from n"));
        }
        for (buyer, &value) in beta.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveMultiplier { buyer, value });
            }
        }
        Ok(())
    }
}

pub(crate) fn log_barrier(budgets: &[f64], beta: &[f64]) -> f64 {
    budgets.iter().zip(beta).map(|(b, x)| b * libm::log(*x)).sum()
}

/// Sample dual objective `H_t(β)`.
pub fn dual_value_sample(market: &FiniteMarket, beta: &[f64]) -> Result<f64> {
    market.check_multipliers(beta)?;
    let revenue = market.prices(beta).iter().sum::<f64>() / market.t as f64;
    Ok(revenue - log_barrier(&market.budgets, beta))
}

/// Element of `∂H_t(β)`; ties go to the lowest buyer index.
pub fn dual_subgradient_sample(market: &FiniteMarket, beta: &[f64]) -> Result<Vec<f64>> {
    market.check_multipliers(beta)?;
    let inv_t = 1.0 / market.t as f64;
    let mut grad: Vec<f64> = market
        .budgets
        .iter()
        .zip(beta)
        .map(|(b, x)| -b / x)
        .collect();
    let mut best = vec![f64::NEG_INFINITY; market.t];
    let mut winner = vec![0usize; market.t];
    for (i, &b) in beta.iter().enumerate() {
        for (item, &v) in market.row(i).iter().enumerate() {
            // Strict comparison keeps the lowest index on ties.
            if b * v > best[item] {
                best[item] = b * v;
                winner[item] = i;
            }
        }
    }
    for (item, &w) in winner.iter().enumerate() {
        grad[w] += market.value(w, item) * inv_t;
    }
    Ok(grad)
}

/// Bid gap and winning set of a single item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapWinner {
    /// Highest minus second-highest bid. `f64::MAX` when there is a single
    /// bidder, see `sole_bidder`.
    pub gap: f64,
    pub winners: Vec<usize>,
    pub sole_bidder: bool,
}

pub fn gap_and_winner(beta: &[f64], item_values: &[f64]) -> Result<GapWinner> {
    if beta.is_empty() || beta.len() != item_values.len() {
        return Err(Error::DimensionMismatch("beta and item values differ in length"));
    }
    let bids: Vec<f64> = beta.iter().zip(item_values).map(|(b, v)| b * v).collect();
    if bids.len() == 1 {
        return Ok(GapWinner { gap: f64::MAX, winners: vec![0], sole_bidder: true });
    }
    let top = bids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..bids.len()).filter(|&i| bids[i] == top).collect();
    let gap = if winners.len() >= 2 {
        0.0
    } else {
        let second = bids
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != winners[0])
            .map(|(_, &b)| b)
            .fold(f64::NEG_INFINITY, f64::max);
        top - second
    };
    Ok(GapWinner { gap, winners, sole_bidder: false })
}
