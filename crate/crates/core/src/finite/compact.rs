//! Item-major working copy of a market with identical columns merged.
//!
//! Duplicate items carry the same bids, so merging them into one item with
//! the combined supply changes neither the dual nor the equilibrium
//! allocation (up to splitting shares evenly back across copies). Items that
//! every buyer values at zero are dropped; they clear at price zero.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::market::FiniteMarket;

pub(crate) struct Compact {
    pub n: usize,
    /// Values, `m × n` item-major.
    pub vals: Vec<f64>,
    /// Supply of each merged item.
    pub weight: Vec<f64>,
    pub budgets: Vec<f64>,
    /// Compact index of each original item, `None` for worthless items.
    pub origin: Vec<Option<usize>>,
    /// Number of original items merged into each compact item.
    pub multiplicity: Vec<usize>,
}

impl Compact {
    pub fn new(market: &FiniteMarket) -> Self {
        let n = market.n();
        let t = market.t();
        let supply = market.supply();
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut vals = Vec::new();
        let mut weight = Vec::new();
        let mut multiplicity = Vec::new();
        let mut origin = vec![None; t];
        for item in 0..t {
            let col = market.item_values(item);
            if col.iter().all(|&v| v == 0.0) {
                continue;
            }
            let key: Vec<u64> = col.iter().map(|v| v.to_bits()).collect();
            let next = weight.len();
            let k = *index.entry(key).or_insert(next);
            if k == next {
                vals.extend_from_slice(&col);
                weight.push(0.0);
                multiplicity.push(0);
            }
            weight[k] += supply;
            multiplicity[k] += 1;
            origin[item] = Some(k);
        }
        Compact { n, vals, weight, budgets: market.budgets().to_vec(), origin, multiplicity }
    }

    pub fn m(&self) -> usize {
        self.weight.len()
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.vals[j * self.n..(j + 1) * self.n]
    }

    /// `Σ_j w_j v_ij` for every buyer.
    pub fn mean_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for j in 0..self.m() {
            for (o, v) in out.iter_mut().zip(self.col(j)) {
                *o += self.weight[j] * v;
            }
        }
        out
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// Price and lowest-index winner of item `j`.
    #[inline]
    pub fn top(&self, beta: &[f64], j: usize) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut who = 0;
        for (i, (&b, &v)) in beta.iter().zip(self.col(j)).enumerate() {
            if b * v > best {
                best = b * v;
                who = i;
            }
        }
        (best, who)
    }

    /// `Σ_j w_j max_i β_i v_ij`.
    pub fn revenue(&self, beta: &[f64]) -> f64 {
        (0..self.m()).map(|j| self.weight[j] * self.top(beta, j).0).sum()
    }

    pub fn dual_value(&self, beta: &[f64]) -> f64 {
        self.revenue(beta) - crate::market::log_barrier(&self.budgets, beta)
    }

    /// Lowest-index subgradient of the dual.
    pub fn subgradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.budgets.iter().zip(beta).map(|(b, x)| -b / x).collect();
        for j in 0..self.m() {
            let (_, w) = self.top(beta, j);
            g[w] += self.weight[j] * self.col(j)[w];
        }
        g
    }

    /// Utilities `Σ_j v_ij x_ij` of an item-major allocation.
    pub fn utilities(&self, alloc: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n];
        for j in 0..self.m() {
            let col = self.col(j);
            let x = &alloc[j * self.n..(j + 1) * self.n];
            for i in 0..self.n {
                u[i] += col[i] * x[i];
            }
        }
        u
    }
}
