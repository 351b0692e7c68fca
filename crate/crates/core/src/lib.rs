//! Equilibria and statistical inference for sampled Fisher markets.
//!
//! A long-run market has finitely many buyers and a continuum of items drawn
//! from a supply distribution. An observed market is built by sampling `t`
//! items i.i.d. from that distribution. This crate computes equilibria of
//! observed linear and quasilinear markets, exact long-run equilibria for
//! one-dimensional linear valuations, and the estimators and confidence
//! intervals that connect the two.
//!
//! The crate is `no_std` and only needs `alloc`; IO, CLI and threading live in
//! the companion `fisher-infer` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod finite;
pub mod fixtures;
pub mod inference;
pub mod linalg;
pub mod longrun;
pub mod market;
pub mod sampling;
pub mod spec;
pub mod stats;

pub use error::{Error, Result};
pub use finite::{
    cross_check_solvers, solve_sample_eg, solve_sample_qeg, verify_kkt, Backend, MarketOutcome, Certificate,
    FiniteEquilibrium, KktReport, QuasiFiniteEquilibrium, Share, SolveOptions,
};
pub use longrun::{
    asymptotic_pack, dual_grad_pop, dual_value_pop, hessian_longrun_linear, omega2,
    score_covariance, sigma2_nsw, sigma_beta_u, sigma_beta_u_from_score, solve_longrun_eg,
    solve_longrun_qeg, upper_envelope, AsymptoticPack, Envelope, LongRunEquilibrium, PopGradient,
    PriceSegment, QuasiLongRunEquilibrium,
};
pub use market::{
    dual_subgradient_sample, dual_value_sample, gap_and_winner, FiniteMarket, GapWinner,
};
pub use inference::{
    ci_beta_u, ci_nsw, estimate_omega2, estimate_score_covariance, estimate_sigma2_nsw,
    hessian_numdiff, infer, HessianInput, HessianMode, InferenceReport, Interval,
};
pub use sampling::sample_items;
pub use spec::{eq_bounds, normalize_spec, normalize_values, EqBounds, LongRunSpec, Supply, Valuation};
