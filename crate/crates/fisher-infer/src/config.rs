//! Experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fisher_core::{normalize_spec, normalize_values, HessianMode, LongRunSpec, SolveOptions};
use serde::{Deserialize, Serialize};

use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Convergence,
    Clt,
    Coverage,
    RevenueQlin,
    SingleSolve,
}

/// Inline spec or a path to a spec JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecSource {
    Inline(LongRunSpec),
    Path(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    /// Directory receiving CSV and JSON tables.
    pub dir: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_longrun_tol() -> f64 {
    1e-12
}

fn default_true() -> bool {
    true
}

fn default_hessian() -> HessianMode {
    HessianMode::IntDiagonal
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SpecSource,
    pub t_grid: Vec<usize>,
    pub k: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub mode: Mode,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default = "default_longrun_tol")]
    pub longrun_tol: f64,
    /// Normalize the market before use: budgets and values for linear modes,
    /// values only for the quasilinear mode.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Hessian used for the `β` and `u` intervals in coverage runs.
    #[serde(default = "default_hessian")]
    pub hessian: HessianMode,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(spec: LongRunSpec, t_grid: Vec<usize>, k: usize, base_seed: u64, mode: Mode) -> Self {
        ExperimentConfig {
            spec: SpecSource::Inline(spec),
            t_grid,
            k,
            base_seed,
            alpha: default_alpha(),
            mode,
            solver: SolveOptions::default(),
            longrun_tol: default_longrun_tol(),
            normalize: true,
            hessian: default_hessian(),
            output: OutputPaths::default(),
        }
    }

    /// Reads a config and resolves a relative spec path against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let SpecSource::Path(p) = &mut cfg.spec {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            bail!("t_grid must not be empty");
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("t_grid must be strictly ascending");
        }
        if self.t_grid[0] < 2 {
            bail!("every t must be at least 2");
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1)");
        }
        Ok(())
    }

    /// Spec after loading and the configured normalization.
    pub fn resolve_spec(&self) -> Result<LongRunSpec> {
        let raw = match &self.spec {
            SpecSource::Inline(s) => s.clone(),
            SpecSource::Path(p) => io::read_spec(p)?,
        };
        if !self.normalize {
            return Ok(raw);
        }
        let spec = if self.mode == Mode::RevenueQlin { normalize_values(&raw)? } else { normalize_spec(&raw)? };
        Ok(spec)
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.dir.as_deref()
    }
}
