//! Proportional-response dynamics on bids.
//!
//! Each round every buyer re-splits its budget across items in proportion to
//! the utility each item contributed at the previous round. Prices are the
//! column sums of the bids. For quasilinear buyers a slack bid on "keeping
//! money" competes with the item bids.

use alloc::vec;
use alloc::vec::Vec;

use super::compact::Compact;

pub(crate) struct PrState {
    /// Item-major bids, `m × n`.
    bids: Vec<f64>,
    /// Slack bids of quasilinear buyers.
    slack: Option<Vec<f64>>,
    /// Item-major allocation of the latest round.
    pub alloc: Vec<f64>,
    pub utilities: Vec<f64>,
}

impl PrState {
    pub fn new(c: &Compact, quasi: bool) -> Self {
        let n = c.n;
        let m = c.m();
        let total_w: f64 = c.weight.iter().sum();
        let item_share = if quasi { 0.5 } else { 1.0 };
        let mut bids = vec![0.0; m * n];
        for j in 0..m {
            for i in 0..n {
                bids[j * n + i] = item_share * c.budgets[i] * c.weight[j] / total_w;
            }
        }
        let slack = quasi.then(|| c.budgets.iter().map(|b| 0.5 * b).collect());
        let mut state = PrState { bids, slack, alloc: vec![0.0; m * n], utilities: vec![0.0; n] };
        state.allocate(c);
        state
    }

    /// Allocation and utilities implied by the current bids.
    fn allocate(&mut self, c: &Compact) {
        let n = c.n;
        self.utilities.iter_mut().for_each(|u| *u = 0.0);
        for j in 0..c.m() {
            let b = &self.bids[j * n..(j + 1) * n];
            let price: f64 = b.iter().sum();
            let col = c.col(j);
            let x = &mut self.alloc[j * n..(j + 1) * n];
            if price > 0.0 {
                for i in 0..n {
                    x[i] = b[i] / price * c.weight[j];
                    self.utilities[i] += col[i] * x[i];
                }
            } else {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// One round of bid updates.
    pub fn step(&mut self, c: &Compact) {
        let n = c.n;
        let denom: Vec<f64> = match &self.slack {
            None => self.utilities.clone(),
            Some(s) => self.utilities.iter().zip(s).map(|(u, d)| u + d).collect(),
        };
        for j in 0..c.m() {
            let col = c.col(j);
            for i in 0..n {
                let k = j * n + i;
                self.bids[k] = if denom[i] > 0.0 {
                    c.budgets[i] * col[i] * self.alloc[k] / denom[i]
                } else {
                    0.0
                };
            }
        }
        if let Some(s) = &mut self.slack {
            for i in 0..n {
                if denom[i] > 0.0 {
                    s[i] = c.budgets[i] * s[i] / denom[i];
                }
            }
        }
        self.allocate(c);
    }

    /// Multipliers `b_i / u_i`, or `b_i / (u_i + δ_i)` with slack.
    pub fn beta(&self, c: &Compact) -> Vec<f64> {
        (0..c.n)
            .map(|i| {
                let d = self.slack.as_ref().map_or(0.0, |s| s[i]);
                let beta = c.budgets[i] / (self.utilities[i] + d);
                if self.slack.is_some() {
                    beta.min(1.0)
                } else {
                    beta
                }
            })
            .collect()
    }
}
