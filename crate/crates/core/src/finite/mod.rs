//! Equilibria of observed (finite) markets.
//!
//! The equilibrium multipliers minimize the sample dual
//! `H_t(β) = (1/t) Σ_τ max_i β_i v_iτ − Σ_i b_i log β_i`, over `β > 0` for
//! linear buyers and over `0 < β ≤ 1` for quasilinear ones. A solve runs a
//! first-order backend, refines on a smoothed dual, recovers the exact tie
//! structure, and certifies the result by its duality gap.

mod active_set;
mod compact;
mod kkt;
mod proportional;
mod smoothed;
mod subgradient;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::FiniteMarket;
use compact::Compact;

pub use kkt::{verify_kkt, KktReport, MarketOutcome};

/// Amount of one item held by one buyer. Amounts of an item sum to its
/// supply `1/t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Share {
    pub item: usize,
    pub buyer: usize,
    pub amount: f64,
}

impl From<(usize, usize, f64)> for Share {
    fn from((item, buyer, amount): (usize, usize, f64)) -> Self {
        Share { item, buyer, amount }
    }
}

impl From<Share> for (usize, usize, f64) {
    fn from(s: Share) -> Self {
        (s.item, s.buyer, s.amount)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Dual value minus primal value of the reported allocation.
    pub duality_gap: f64,
    pub max_kkt_residual: f64,
    pub certified: bool,
    pub iterations: usize,
    /// Whether the exact tie structure was recovered.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteEquilibrium {
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<Share>,
    pub p: Vec<f64>,
    pub nsw: f64,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiFiniteEquilibrium {
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<Share>,
    pub p: Vec<f64>,
    pub leftover: Vec<f64>,
    pub rev: f64,
    pub certificate: Certificate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ProportionalResponse,
    ProjectedSubgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Duality-gap tolerance for certification.
    pub tol: f64,
    /// Iteration budget of the first-order backend.
    pub max_iter: usize,
    pub backend: Backend,
    /// Refine the backend iterate by smoothed Newton steps and exact tie
    /// recovery. Without it the backend alone runs to `tol` or `max_iter`.
    pub refine: bool,
    /// Backend iterations used as a warm start when refining.
    pub warm_start_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 200_000,
            backend: Backend::ProportionalResponse,
            refine: true,
            warm_start_iter: 200,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Self::default() }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

/// Leftovers below this magnitude are roundoff.
const LEFTOVER_CLAMP: f64 = 1e-12;

struct Raw {
    beta: Vec<f64>,
    alloc: Vec<f64>,
    iterations: usize,
    exact: bool,
}

fn check_market(market: &FiniteMarket) -> Result<()> {
    for i in 0..market.n() {
        if !market.row(i).iter().any(|&v| v > 0.0) {
            return Err(Error::NoPositiveValue { buyer: i });
        }
    }
    Ok(())
}

fn winner_take_all(c: &Compact, beta: &[f64]) -> Vec<f64> {
    let n = c.n;
    let mut alloc = vec![0.0; c.m() * n];
    for j in 0..c.m() {
        alloc[j * n + c.top(beta, j).1] = c.weight[j];
    }
    alloc
}

fn primal_value(c: &Compact, utilities: &[f64], leftover: Option<&[f64]>) -> f64 {
    (0..c.n)
        .map(|i| {
            let b = c.budgets[i];
            match leftover {
                None => b * libm::log(utilities[i]),
                Some(d) => b * libm::log(utilities[i] + d[i]) - d[i],
            }
        })
        .sum()
}

fn gap(c: &Compact, beta: &[f64], utilities: &[f64], leftover: Option<&[f64]>) -> f64 {
    let constant: f64 = c.budgets.iter().map(|&b| b * (libm::log(b) - 1.0)).sum();
    c.dual_value(beta) + constant - primal_value(c, utilities, leftover)
}

fn quasi_leftover(c: &Compact, beta: &[f64], utilities: &[f64]) -> Vec<f64> {
    (0..c.n)
        .map(|i| {
            let d = c.budgets[i] - beta[i] * utilities[i];
            if d <= LEFTOVER_CLAMP * c.budgets[i].max(1.0) {
                0.0
            } else {
                d
            }
        })
        .collect()
}

fn solve_compact(c: &Compact, quasi: bool, opts: &SolveOptions) -> Raw {
    let n = c.n;
    if n == 1 {
        let vbar = c.mean_values()[0];
        let mut beta = c.budgets[0] / vbar;
        if quasi {
            beta = beta.min(1.0);
        }
        return Raw { beta: vec![beta], alloc: c.weight.clone(), iterations: 0, exact: true };
    }
    let budget = if opts.refine { opts.warm_start_iter.min(opts.max_iter) } else { opts.max_iter };
    let (warm, alloc, iterations) = match opts.backend {
        Backend::ProportionalResponse => {
            let mut state = proportional::PrState::new(c, quasi);
            let mut iters = 0;
            while iters < budget {
                state.step(c);
                iters += 1;
                if !opts.refine && iters % 50 == 0 {
                    let beta = state.beta(c);
                    let left = quasi.then(|| quasi_leftover(c, &beta, &state.utilities));
                    if gap(c, &beta, &state.utilities, left.as_deref()) <= opts.tol {
                        break;
                    }
                }
            }
            (state.beta(c), state.alloc, iters)
        }
        Backend::ProjectedSubgradient => {
            let r = subgradient::projected_subgradient(c, quasi, budget, if opts.refine { 0.0 } else { opts.tol });
            let alloc = winner_take_all(c, &r.beta);
            (r.beta, alloc, r.iterations)
        }
    };
    if !opts.refine {
        let beta = if quasi || opts.backend == Backend::ProjectedSubgradient {
            warm
        } else {
            let u = c.utilities(&alloc);
            (0..n).map(|i| c.budgets[i] / u[i]).collect()
        };
        return Raw { beta, alloc, iterations, exact: false };
    }
    refine(c, warm, quasi, iterations)
}

fn refine(c: &Compact, mut beta: Vec<f64>, quasi: bool, mut iterations: usize) -> Raw {
    let total_w: f64 = c.weight.iter().sum();
    let scale = c.revenue(&beta) / total_w;
    let mut mu = scale;
    for stage in 1..=13 {
        mu *= 0.1;
        iterations += smoothed::newton_stage(c, &mut beta, mu, quasi);
        if stage >= 6 {
            if let Some(e) = active_set::identify(c, &beta, quasi) {
                return Raw { beta: e.beta, alloc: e.alloc, iterations, exact: true };
            }
        }
    }
    let alloc = smoothed::soft_allocation(c, &beta, mu);
    if !quasi {
        let u = c.utilities(&alloc);
        beta = (0..c.n).map(|i| c.budgets[i] / u[i]).collect();
    }
    Raw { beta, alloc, iterations, exact: false }
}

/// Shares on the original items, splitting merged items evenly.
fn expand(c: &Compact, market: &FiniteMarket, alloc: &[f64]) -> Vec<Share> {
    let n = c.n;
    let mut shares = Vec::new();
    for (item, origin) in c.origin.iter().enumerate() {
        match origin {
            Some(k) => {
                let copies = c.multiplicity[*k] as f64;
                for buyer in 0..n {
                    let a = alloc[k * n + buyer];
                    if a > 0.0 {
                        shares.push(Share { item, buyer, amount: a / copies });
                    }
                }
            }
            None => shares.push(Share { item, buyer: 0, amount: market.supply() }),
        }
    }
    shares
}

/// Equilibrium of a market of linear buyers.
pub fn solve_sample_eg(market: &FiniteMarket, opts: &SolveOptions) -> Result<FiniteEquilibrium> {
    check_market(market)?;
    let c = Compact::new(market);
    let raw = solve_compact(&c, false, opts);
    let utilities = c.utilities(&raw.alloc);
    let duality_gap = gap(&c, &raw.beta, &utilities, None);
    let u: Vec<f64> = market.budgets().iter().zip(&raw.beta).map(|(b, x)| b / x).collect();
    let nsw = market.budgets().iter().zip(&u).map(|(b, u)| b * libm::log(*u)).sum();
    let mut eq = FiniteEquilibrium {
        x: expand(&c, market, &raw.alloc),
        p: market.prices(&raw.beta),
        beta: raw.beta,
        u,
        nsw,
        certificate: Certificate {
            duality_gap,
            max_kkt_residual: 0.0,
            certified: duality_gap <= opts.tol,
            iterations: raw.iterations,
            exact: raw.exact,
        },
    };
    eq.certificate.max_kkt_residual = verify_kkt(market, &eq, opts.tol)?.max_residual();
    Ok(eq)
}

/// Equilibrium of a market of quasilinear buyers, who may keep money.
pub fn solve_sample_qeg(market: &FiniteMarket, opts: &SolveOptions) -> Result<QuasiFiniteEquilibrium> {
    check_market(market)?;
    let c = Compact::new(market);
    let raw = solve_compact(&c, true, opts);
    let utilities = c.utilities(&raw.alloc);
    let leftover = quasi_leftover(&c, &raw.beta, &utilities);
    let duality_gap = gap(&c, &raw.beta, &utilities, Some(&leftover));
    let p = market.prices(&raw.beta);
    let rev = p.iter().sum::<f64>() * market.supply();
    let mut eq = QuasiFiniteEquilibrium {
        x: expand(&c, market, &raw.alloc),
        p,
        beta: raw.beta,
        u: utilities,
        leftover,
        rev,
        certificate: Certificate {
            duality_gap,
            max_kkt_residual: 0.0,
            certified: duality_gap <= opts.tol,
            iterations: raw.iterations,
            exact: raw.exact,
        },
    };
    eq.certificate.max_kkt_residual = verify_kkt(market, &eq, opts.tol)?.max_residual();
    Ok(eq)
}

/// Solves with both backends and returns `max_i |β_i^PR − β_i^SG|`.
pub fn cross_check_solvers(market: &FiniteMarket, tol: f64) -> Result<f64> {
    let base = SolveOptions::with_tol(tol);
    let mut betas = Vec::with_capacity(2);
    for backend in [Backend::ProportionalResponse, Backend::ProjectedSubgradient] {
        let eq = solve_sample_eg(market, &base.clone().with_backend(backend))?;
        if !eq.certificate.certified {
            return Err(Error::NotConverged { residual: eq.certificate.duality_gap });
        }
        betas.push(eq.beta);
    }
    let discrepancy = betas[0].iter().zip(&betas[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let limit = 10.0 * tol;
    if discrepancy > limit {
        return Err(Error::SolverMismatch { discrepancy, limit });
    }
    Ok(discrepancy)
}

#[cfg(test)]
mod tests;
