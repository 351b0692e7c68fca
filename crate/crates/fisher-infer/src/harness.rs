//! Seeded, parallel replication runner.
//!
//! Each replication is identified by `(t, rep)` and draws its market from
//! `derive_seed(base_seed, t, rep)`. Results come back in `(t, rep)` order
//! regardless of how many workers ran them.

use std::time::Instant;

use anyhow::Result;
use fisher_core::sampling::derive_seed;
use fisher_core::{
    sample_items, solve_sample_eg, solve_sample_qeg, Certificate, FiniteEquilibrium, FiniteMarket, Interval,
    LongRunSpec, QuasiFiniteEquilibrium, SolveOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FISHER_INFER_THREADS";

/// Worker count from `FISHER_INFER_THREADS`, defaulting to the available
/// parallelism.
pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n >= 1 => n,
        _ => available,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
}

pub fn jobs(t_grid: &[usize], k: usize, base_seed: u64) -> Vec<Job> {
    t_grid
        .iter()
        .flat_map(|&t| (0..k).map(move |rep| Job { t, rep, seed: derive_seed(base_seed, t, rep) }))
        .collect()
}

/// Runs `f` on every job with at most `threads` workers, keeping job order.
pub fn run_jobs<T, F>(jobs: &[Job], threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Job) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum SolveStatus {
    Certified,
    /// The solve returned without a certificate.
    NotCertified,
    Failed(String),
}

impl SolveStatus {
    fn from_certificate(c: &Certificate) -> Self {
        if c.certified {
            SolveStatus::Certified
        } else {
            SolveStatus::NotCertified
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, SolveStatus::Certified)
    }
}

/// Outcome of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    pub nsw_hat: f64,
    pub beta_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub rev_hat: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub ci: Option<Interval>,
    pub status: SolveStatus,
    /// Excluded from serialized output so that files stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl ReplicationResult {
    fn failed(job: &Job, err: impl ToString, wall_time: f64) -> Self {
        ReplicationResult {
            t: job.t,
            rep: job.rep,
            seed: job.seed,
            nsw_hat: f64::NAN,
            beta_hat: vec![],
            u_hat: vec![],
            rev_hat: None,
            sigma2_hat: None,
            ci: None,
            status: SolveStatus::Failed(err.to_string()),
            wall_time,
        }
    }
}

/// Samples and solves the linear market of one job; `extra` may fill in
/// estimator fields from the market and equilibrium.
pub fn solve_linear_job<F>(spec: &LongRunSpec, job: &Job, opts: &SolveOptions, extra: F) -> ReplicationResult
where
    F: FnOnce(&FiniteMarket, &FiniteEquilibrium, &mut ReplicationResult) -> Result<()>,
{
    let start = Instant::now();
    let outcome = sample_items(spec, job.t, job.seed)
        .map_err(anyhow::Error::from)
        .and_then(|m| Ok((solve_sample_eg(&m, opts)?, m)));
    let (eq, market) = match outcome {
        Ok(x) => x,
        Err(e) => return ReplicationResult::failed(job, e, start.elapsed().as_secs_f64()),
    };
    let mut r = ReplicationResult {
        t: job.t,
        rep: job.rep,
        seed: job.seed,
        nsw_hat: eq.nsw,
        beta_hat: eq.beta.clone(),
        u_hat: eq.u.clone(),
        rev_hat: None,
        sigma2_hat: None,
        ci: None,
        status: SolveStatus::from_certificate(&eq.certificate),
        wall_time: 0.0,
    };
    if let Err(e) = extra(&market, &eq, &mut r) {
        r.status = SolveStatus::Failed(e.to_string());
    }
    r.wall_time = start.elapsed().as_secs_f64();
    r
}

/// Samples and solves the quasilinear market of one job.
pub fn solve_quasi_job(spec: &LongRunSpec, job: &Job, opts: &SolveOptions) -> (ReplicationResult, Option<QuasiFiniteEquilibrium>) {
    let start = Instant::now();
    let outcome = sample_items(spec, job.t, job.seed)
        .map_err(anyhow::Error::from)
        .and_then(|m| Ok(solve_sample_qeg(&m, opts)?));
    match outcome {
        Ok(eq) => {
            let r = ReplicationResult {
                t: job.t,
                rep: job.rep,
                seed: job.seed,
                nsw_hat: f64::NAN,
                beta_hat: eq.beta.clone(),
                u_hat: eq.u.clone(),
                rev_hat: Some(eq.rev),
                sigma2_hat: None,
                ci: None,
                status: SolveStatus::from_certificate(&eq.certificate),
                wall_time: start.elapsed().as_secs_f64(),
            };
            (r, Some(eq))
        }
        Err(e) => (ReplicationResult::failed(job, e, start.elapsed().as_secs_f64()), None),
    }
}
