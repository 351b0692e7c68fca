//! `fisher-infer` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fisher_core::{
    infer, normalize_spec, normalize_values, sample_items, solve_sample_eg, solve_sample_qeg, HessianMode,
    SolveOptions,
};
use fisher_infer::config::{ExperimentConfig, Mode};
use fisher_infer::experiments::{
    run_clt, run_convergence, run_coverage, run_revenue_qlin, write_clt, write_convergence, write_coverage,
    write_revenue_qlin,
};
use fisher_infer::io::{read_spec, write_json, write_market_csv};
use fisher_infer::table::render_report;
use fisher_infer::thread_count;

#[derive(Parser)]
#[command(name = "fisher-infer", version, about = "Equilibria and inference for sampled Fisher markets")]
struct Cli {
    /// Worker threads; defaults to FISHER_INFER_THREADS or all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one market and solve it.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Equilibrium JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Solve the quasilinear market.
        #[arg(long)]
        quasi: bool,
        /// Use the market as given instead of normalizing it.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Numerical-difference smoothing for the Hessian; t^{-1/4} if absent.
        #[arg(long)]
        eta: Option<f64>,
        /// Use the diagonal Hessian instead of numerical differences.
        #[arg(long)]
        int_diagonal: bool,
        /// Also write the sampled market as CSV.
        #[arg(long)]
        market_csv: Option<PathBuf>,
        /// Also write the inference report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convergence sweep over `t_grid`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Standardized welfare distribution at the largest `t`.
    Clt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical coverage of the confidence intervals.
    Coverage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quasilinear revenue sweep.
    Qlin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(cfg: &ExperimentConfig, cli_out: Option<PathBuf>) -> PathBuf {
    cli_out.or_else(|| cfg.output_dir().map(Path::to_path_buf)).unwrap_or_else(|| PathBuf::from("."))
}

fn load(path: &Path, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    // The subcommand fixes the experiment; a config written for another mode
    // is reused with its grid and seeds.
    cfg.mode = mode;
    Ok(cfg)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.unwrap_or_else(thread_count);
    match cli.command {
        Command::Solve { spec, t, seed, out, quasi, raw, tol, alpha, eta, int_diagonal, market_csv, report } => {
            let spec = read_spec(&spec)?;
            let spec = match (raw, quasi) {
                (true, _) => spec,
                (false, true) => normalize_values(&spec)?,
                (false, false) => normalize_spec(&spec)?,
            };
            let market = sample_items(&spec, t, seed)?;
            if let Some(path) = market_csv {
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_market_csv(file, &market)?;
            }
            let opts = SolveOptions::with_tol(tol);
            if quasi {
                let eq = solve_sample_qeg(&market, &opts)?;
                write_json(&out, &eq)?;
                println!("REV {:.10}  certified {}  gap {:.3e}", eq.rev, eq.certificate.certified, eq.certificate.duality_gap);
            } else {
                let eq = solve_sample_eg(&market, &opts)?;
                write_json(&out, &eq)?;
                let mode = if int_diagonal { HessianMode::IntDiagonal } else { HessianMode::NumDiff { eta } };
                let r = infer(&market, &eq, mode, alpha)?;
                print!("{}", render_report(&r));
                println!("certified {}  gap {:.3e}", eq.certificate.certified, eq.certificate.duality_gap);
                if let Some(path) = report {
                    write_json(&path, &r)?;
                }
            }
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config, Mode::Convergence)?;
            let r = run_convergence(&cfg, threads)?;
            write_convergence(&r, &out_dir(&cfg, out))?;
            println!("{:>8} {:>14} {:>12} {:>14} {:>14} {:>5}", "t", "mean_nsw", "stderr", "mean_abs_err", "mean_beta_err", "uncert");
            for s in &r.summary {
                println!(
                    "{:>8} {:>14.8} {:>12.4e} {:>14} {:>14} {:>5}",
                    s.t,
                    s.mean_nsw,
                    s.stderr_nsw,
                    fmt_opt(s.mean_abs_err),
                    fmt_opt(s.mean_beta_err),
                    s.uncertified
                );
            }
            if let Some(f) = r.nsw_rate {
                println!("NSW error rate slope {:.4} (r2 {:.3})", f.slope, f.r2);
            }
            if let Some(f) = r.beta_rate {
                println!("beta error rate slope {:.4} (r2 {:.3})", f.slope, f.r2);
            }
        }
        Command::Clt { config, out } => {
            let cfg = load(&config, Mode::Clt)?;
            let r = run_clt(&cfg, threads)?;
            write_clt(&r, &out_dir(&cfg, out))?;
            println!("t {}  k {}  NSW* {:.10}  sigma2 {:.6e}", r.t, r.samples.len(), r.nsw_star, r.sigma2_nsw);
            println!("sample variance {}", fmt_opt(r.sample_variance));
            match r.ks {
                Some(ks) => println!("KS D {:.4}  p-value {:.4}", ks.d_stat, ks.p_value),
                None => println!("degenerate: limiting variance is zero"),
            }
        }
        Command::Coverage { config, out } => {
            let cfg = load(&config, Mode::Coverage)?;
            let r = run_coverage(&cfg, threads)?;
            write_coverage(&r, &out_dir(&cfg, out))?;
            println!("t {}  k {}  alpha {}  NSW coverage {:.4} ± {:.4}", r.t, r.k, r.alpha, r.coverage, r.stderr);
            for (i, (b, u)) in r.beta_coverage.iter().zip(&r.u_coverage).enumerate() {
                println!("buyer {:>3}  beta coverage {b:.4}  u coverage {u:.4}", i + 1);
            }
        }
        Command::Qlin { config, out } => {
            let cfg = load(&config, Mode::RevenueQlin)?;
            let r = run_revenue_qlin(&cfg, threads)?;
            write_revenue_qlin(&r, &out_dir(&cfg, out))?;
            println!("REV* {:.10}", r.reference.rev_star);
            println!("{:>8} {:>14} {:>14} {:>12} {:>5}", "t", "mean_rev", "mean_abs_err", "max_slack", "uncert");
            for s in &r.summary {
                println!(
                    "{:>8} {:>14.8} {:>14.6e} {:>12.3e} {:>5}",
                    s.t, s.mean_rev, s.mean_abs_err, s.max_slack_product, s.uncertified
                );
            }
            if let Some(f) = r.rate {
                println!("revenue error rate slope {:.4} (r2 {:.3})", f.slope, f.r2);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
