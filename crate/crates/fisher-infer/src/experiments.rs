//! The replication experiments: convergence sweeps, CLT checks, interval
//! coverage and quasilinear revenue.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fisher_core::stats::{fit_rate, ks_normal_test, qq_points, sample_variance, summarize_reps, KsResult, RateFit};
use fisher_core::{infer, LongRunSpec};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::harness::{jobs, run_jobs, solve_linear_job, solve_quasi_job, ReplicationResult, SolveStatus};
use crate::io::{write_csv, write_json};
use crate::reference::{linear_reference, quasi_reference, QuasiReference, Reference};

/// Relative slack when testing whether an interval covers the truth, so
/// that zero-width intervals of degenerate markets count as covering.
const COVER_SLACK: f64 = 1e-12;

/// Variances below this mark a degenerate experiment.
const DEGENERATE_VARIANCE: f64 = 1e-14;

fn check_mode(cfg: &ExperimentConfig, expected: Mode) -> Result<()> {
    cfg.validate()?;
    if cfg.mode != expected {
        bail!("config mode is {:?}, expected {:?}", cfg.mode, expected);
    }
    Ok(())
}

fn require_reference(spec: &LongRunSpec, tol: f64) -> Result<Reference> {
    linear_reference(spec, tol)?.context("this experiment needs a one-dimensional linear spec")
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    match summarize_reps(values) {
        Ok(s) => (s.mean, s.stderr),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rate fit over the positive finite points, if at least two remain.
fn rate_over(points: impl Iterator<Item = (f64, f64)>) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = points.filter(|p| p.1 > 0.0 && p.1.is_finite()).collect();
    fit_rate(&pts).ok()
}

fn covers(lo: f64, hi: f64, x: f64) -> bool {
    let slack = COVER_SLACK * x.abs().max(1.0);
    lo - slack <= x && x <= hi + slack
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    pub nsw_hat: f64,
    pub nsw_star: Option<f64>,
    pub abs_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummaryRow {
    pub t: usize,
    pub mean_nsw: f64,
    pub stderr_nsw: f64,
    pub mean_abs_err: Option<f64>,
    pub stderr_abs_err: Option<f64>,
    /// Mean of `‖β̂ − β*‖₂`.
    pub mean_beta_err: Option<f64>,
    pub uncertified: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference: Option<Reference>,
    pub summary: Vec<ConvergenceSummaryRow>,
    pub nsw_rate: Option<RateFit>,
    pub beta_rate: Option<RateFit>,
    pub rows: Vec<ConvergenceRow>,
    pub replications: Vec<ReplicationResult>,
}

pub fn run_convergence(cfg: &ExperimentConfig, threads: usize) -> Result<ConvergenceReport> {
    check_mode(cfg, Mode::Convergence)?;
    let spec = cfg.resolve_spec()?;
    let reference = linear_reference(&spec, cfg.longrun_tol)?;
    let js = jobs(&cfg.t_grid, cfg.k, cfg.base_seed);
    let reps = run_jobs(&js, threads, |j| solve_linear_job(&spec, j, &cfg.solver, |_, _, _| Ok(())))?;
    let nsw_star = reference.as_ref().map(|r| r.nsw_star);
    let rows: Vec<ConvergenceRow> = reps
        .iter()
        .map(|r| ConvergenceRow {
            t: r.t,
            rep: r.rep,
            seed: r.seed,
            nsw_hat: r.nsw_hat,
            nsw_star,
            abs_err: nsw_star.map(|s| (r.nsw_hat - s).abs()),
        })
        .collect();
    let summary: Vec<ConvergenceSummaryRow> = cfg
        .t_grid
        .iter()
        .map(|&t| {
            let group: Vec<&ReplicationResult> = reps.iter().filter(|r| r.t == t && r.nsw_hat.is_finite()).collect();
            let nsw: Vec<f64> = group.iter().map(|r| r.nsw_hat).collect();
            let (mean_nsw, stderr_nsw) = mean_and_stderr(&nsw);
            let (mean_abs_err, stderr_abs_err, mean_beta_err) = match &reference {
                Some(reference) => {
                    let errs: Vec<f64> = nsw.iter().map(|x| (x - reference.nsw_star).abs()).collect();
                    let beta: Vec<f64> = group.iter().map(|r| euclidean(&r.beta_hat, &reference.beta_star)).collect();
                    let (m, s) = mean_and_stderr(&errs);
                    (Some(m), Some(s), Some(mean_and_stderr(&beta).0))
                }
                None => (None, None, None),
            };
            ConvergenceSummaryRow {
                t,
                mean_nsw,
                stderr_nsw,
                mean_abs_err,
                stderr_abs_err,
                mean_beta_err,
                uncertified: reps.iter().filter(|r| r.t == t && !r.status.is_certified()).count(),
            }
        })
        .collect();
    let nsw_rate = rate_over(summary.iter().filter_map(|s| Some((s.t as f64, s.mean_abs_err?))));
    let beta_rate = rate_over(summary.iter().filter_map(|s| Some((s.t as f64, s.mean_beta_err?))));
    Ok(ConvergenceReport { reference, summary, nsw_rate, beta_rate, rows, replications: reps })
}

pub fn write_convergence(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("convergence.csv"), &report.rows)?;
    write_csv(&dir.join("convergence_summary.csv"), &report.summary)?;
    write_json(&dir.join("convergence.json"), report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    pub rep: usize,
    pub seed: u64,
    pub standardized_nsw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub empirical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub t: usize,
    pub nsw_star: f64,
    pub sigma2_nsw: f64,
    pub samples: Vec<CltSample>,
    pub sample_variance: Option<f64>,
    pub ks: Option<KsResult>,
    pub qq: Vec<QqPoint>,
    /// The limiting variance is zero, so no normal law is tested.
    pub degenerate: bool,
    pub uncertified: usize,
}

/// Standardized welfare `√t (NSW^γ − NSW*)` over `k` markets of size
/// `t = max(t_grid)`, tested against `N(0, σ_N²)`.
pub fn run_clt(cfg: &ExperimentConfig, threads: usize) -> Result<CltReport> {
    check_mode(cfg, Mode::Clt)?;
    let spec = cfg.resolve_spec()?;
    let reference = require_reference(&spec, cfg.longrun_tol)?;
    let t = *cfg.t_grid.last().expect("validated nonempty");
    let js = jobs(&[t], cfg.k, cfg.base_seed);
    let reps = run_jobs(&js, threads, |j| solve_linear_job(&spec, j, &cfg.solver, |_, _, _| Ok(())))?;
    let scale = (t as f64).sqrt();
    let samples: Vec<CltSample> = reps
        .iter()
        .filter(|r| r.nsw_hat.is_finite())
        .map(|r| CltSample { rep: r.rep, seed: r.seed, standardized_nsw: scale * (r.nsw_hat - reference.nsw_star) })
        .collect();
    let values: Vec<f64> = samples.iter().map(|s| s.standardized_nsw).collect();
    let sigma = reference.sigma2_nsw.sqrt();
    let degenerate = reference.sigma2_nsw < DEGENERATE_VARIANCE;
    let (ks, qq) = if degenerate || values.len() < 2 {
        (None, vec![])
    } else {
        let qq = qq_points(&values, 0.0, sigma)?
            .into_iter()
            .map(|(theoretical, empirical)| QqPoint { theoretical, empirical })
            .collect();
        (Some(ks_normal_test(&values, 0.0, sigma)?), qq)
    };
    Ok(CltReport {
        t,
        nsw_star: reference.nsw_star,
        sigma2_nsw: reference.sigma2_nsw,
        sample_variance: sample_variance(&values).ok(),
        samples,
        ks,
        qq,
        degenerate,
        uncertified: reps.iter().filter(|r| !r.status.is_certified()).count(),
    })
}

pub fn write_clt(report: &CltReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("clt.csv"), &report.samples)?;
    write_csv(&dir.join("clt_qq.csv"), &report.qq)?;
    write_json(&dir.join("clt.json"), report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub rep: usize,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub t: usize,
    pub alpha: f64,
    pub nsw_star: f64,
    /// Replications with a usable interval.
    pub k: usize,
    pub coverage: f64,
    /// Binomial standard error `√(c(1 − c)/k)`.
    pub stderr: f64,
    pub beta_coverage: Vec<f64>,
    pub u_coverage: Vec<f64>,
    pub rows: Vec<CoverageRow>,
    pub uncertified: usize,
}

/// Per-replication interval outcome for `β` and `u`, stored beside the row.
struct CoverageOutcome {
    row: Option<CoverageRow>,
    beta: Vec<bool>,
    u: Vec<bool>,
    certified: bool,
}

/// Fraction of `k` replications at `t = max(t_grid)` whose intervals cover
/// the long-run values.
pub fn run_coverage(cfg: &ExperimentConfig, threads: usize) -> Result<CoverageReport> {
    check_mode(cfg, Mode::Coverage)?;
    let spec = cfg.resolve_spec()?;
    let reference = require_reference(&spec, cfg.longrun_tol)?;
    let t = *cfg.t_grid.last().expect("validated nonempty");
    let js = jobs(&[t], cfg.k, cfg.base_seed);
    let outcomes = run_jobs(&js, threads, |j| {
        let mut cover = (Vec::new(), Vec::new());
        let r = solve_linear_job(&spec, j, &cfg.solver, |market, eq, r| {
            let report = infer(market, eq, cfg.hessian, cfg.alpha)?;
            r.sigma2_hat = Some(report.sigma2_nsw_hat);
            r.ci = Some(report.nsw_ci);
            cover.0 = report.beta_ci.iter().zip(&reference.beta_star).map(|(c, b)| covers(c.lo, c.hi, *b)).collect();
            cover.1 = report.u_ci.iter().zip(&reference.u_star).map(|(c, u)| covers(c.lo, c.hi, *u)).collect();
            Ok(())
        });
        let row = r.ci.map(|ci| CoverageRow {
            rep: r.rep,
            seed: r.seed,
            lo: ci.lo,
            hi: ci.hi,
            covered: covers(ci.lo, ci.hi, reference.nsw_star),
        });
        CoverageOutcome { row, beta: cover.0, u: cover.1, certified: r.status == SolveStatus::Certified }
    })?;
    let rows: Vec<CoverageRow> = outcomes.iter().filter_map(|o| o.row.clone()).collect();
    let k = rows.len();
    if k == 0 {
        bail!("no replication produced an interval");
    }
    let coverage = rows.iter().filter(|r| r.covered).count() as f64 / k as f64;
    let fraction = |pick: &dyn Fn(&CoverageOutcome) -> &Vec<bool>| -> Vec<f64> {
        (0..spec.n)
            .map(|i| {
                let hits: Vec<bool> = outcomes.iter().filter_map(|o| pick(o).get(i).copied()).collect();
                hits.iter().filter(|h| **h).count() as f64 / hits.len().max(1) as f64
            })
            .collect()
    };
    Ok(CoverageReport {
        t,
        alpha: cfg.alpha,
        nsw_star: reference.nsw_star,
        k,
        coverage,
        stderr: (coverage * (1.0 - coverage) / k as f64).sqrt(),
        beta_coverage: fraction(&|o| &o.beta),
        u_coverage: fraction(&|o| &o.u),
        rows,
        uncertified: outcomes.iter().filter(|o| !o.certified).count(),
    })
}

pub fn write_coverage(report: &CoverageReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("coverage.csv"), &report.rows)?;
    write_json(&dir.join("coverage.json"), report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlinRow {
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    pub rev_hat: f64,
    pub rev_star: f64,
    pub abs_err: f64,
    /// `max_i δ_i (1 − β_i)`, zero at an exact equilibrium.
    pub slack_product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlinSummaryRow {
    pub t: usize,
    pub mean_rev: f64,
    pub stderr_rev: f64,
    pub mean_abs_err: f64,
    pub stderr_abs_err: f64,
    pub max_slack_product: f64,
    pub uncertified: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlinReport {
    pub reference: QuasiReference,
    pub summary: Vec<QlinSummaryRow>,
    pub rate: Option<RateFit>,
    pub rows: Vec<QlinRow>,
}

pub fn run_revenue_qlin(cfg: &ExperimentConfig, threads: usize) -> Result<QlinReport> {
    check_mode(cfg, Mode::RevenueQlin)?;
    let spec = cfg.resolve_spec()?;
    let reference =
        quasi_reference(&spec, cfg.longrun_tol)?.context("revenue experiment needs a one-dimensional linear spec")?;
    let js = jobs(&cfg.t_grid, cfg.k, cfg.base_seed);
    let results = run_jobs(&js, threads, |j| {
        let (r, eq) = solve_quasi_job(&spec, j, &cfg.solver);
        let slack = eq.map_or(f64::NAN, |eq| {
            eq.leftover.iter().zip(&eq.beta).map(|(d, b)| d * (1.0 - b)).fold(0.0, f64::max)
        });
        (r, slack)
    })?;
    let rows: Vec<QlinRow> = results
        .iter()
        .filter_map(|(r, slack)| {
            let rev = r.rev_hat?;
            Some(QlinRow {
                t: r.t,
                rep: r.rep,
                seed: r.seed,
                rev_hat: rev,
                rev_star: reference.rev_star,
                abs_err: (rev - reference.rev_star).abs(),
                slack_product: *slack,
            })
        })
        .collect();
    let summary: Vec<QlinSummaryRow> = cfg
        .t_grid
        .iter()
        .map(|&t| {
            let group: Vec<&QlinRow> = rows.iter().filter(|r| r.t == t).collect();
            let (mean_rev, stderr_rev) = mean_and_stderr(&group.iter().map(|r| r.rev_hat).collect::<Vec<_>>());
            let (mean_abs_err, stderr_abs_err) = mean_and_stderr(&group.iter().map(|r| r.abs_err).collect::<Vec<_>>());
            QlinSummaryRow {
                t,
                mean_rev,
                stderr_rev,
                mean_abs_err,
                stderr_abs_err,
                max_slack_product: group.iter().map(|r| r.slack_product).fold(0.0, f64::max),
                uncertified: results.iter().filter(|(r, _)| r.t == t && !r.status.is_certified()).count(),
            }
        })
        .collect();
    let rate = rate_over(summary.iter().map(|s| (s.t as f64, s.mean_abs_err)));
    Ok(QlinReport { reference, summary, rate, rows })
}

pub fn write_revenue_qlin(report: &QlinReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("qlin.csv"), &report.rows)?;
    write_csv(&dir.join("qlin_summary.csv"), &report.summary)?;
    write_json(&dir.join("qlin.json"), report)
}
