//! Long-run market specifications.
//!
//! A [`LongRunSpec`] fixes the buyers' budgets, their (linear) valuation
//! functions and the supply distribution of items. Most downstream code
//! assumes the blanket normalization: budgets sum to one and every
//! valuation has unit mean under the supply distribution.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a spec is already normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Valuation {
    /// `v_i(θ) = c_i θ + d_i` on `[0, 1]`.
    #[serde(rename = "linear1d")]
    Linear1D { c: Vec<f64>, d: Vec<f64> },
    /// `v_i(θ) = a_iᵀθ + c_i` on `[0, 1]^dim`.
    #[serde(rename = "linear_md")]
    LinearMultiD { a: Vec<Vec<f64>>, c: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Supply {
    #[serde(rename = "uniform01")]
    Uniform01,
    #[serde(rename = "uniform_cube")]
    UniformCube { dim: usize },
}

impl Supply {
    pub fn dim(&self) -> usize {
        match *self {
            Supply::Uniform01 => 1,
            Supply::UniformCube { dim } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct LongRunSpec {
    pub n: usize,
    pub budgets: Vec<f64>,
    pub valuation: Valuation,
    pub supply: Supply,
}

#[derive(Deserialize)]
struct RawSpec {
    n: usize,
    budgets: Vec<f64>,
    valuation: Valuation,
    supply: Supply,
}

impl TryFrom<RawSpec> for LongRunSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = LongRunSpec {
            n: raw.n,
            budgets: raw.budgets,
            valuation: raw.valuation,
            supply: raw.supply,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl LongRunSpec {
    /// One-dimensional linear market with uniform supply on `[0, 1]`.
    pub fn linear_1d(budgets: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        let spec = LongRunSpec {
            n: budgets.len(),
            budgets,
            valuation: Valuation::Linear1D { c: slopes, d: intercepts },
            supply: Supply::Uniform01,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Multi-dimensional linear market with uniform supply on the unit cube.
    pub fn linear_md(budgets: Vec<f64>, a: Vec<Vec<f64>>, c: Vec<f64>) -> Result<Self> {
        let dim = a.first().map_or(0, Vec::len);
        let spec = LongRunSpec {
            n: budgets.len(),
            budgets,
            valuation: Valuation::LinearMultiD { a, c },
            supply: Supply::UniformCube { dim },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("market needs at least one buyer"));
        }
        if self.budgets.len() != self.n {
            return Err(Error::DimensionMismatch("budgets length differs from n"));
        }
        for (buyer, &b) in self.budgets.iter().enumerate() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::NonPositiveBudget { buyer, value: b });
            }
        }
        match (&self.valuation, self.supply) {
            (Valuation::Linear1D { c, d }, Supply::Uniform01) => {
                if c.len() != self.n || d.len() != self.n {
                    return Err(Error::DimensionMismatch("valuation coefficients differ from n"));
                }
                if c.iter().chain(d).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("valuation coefficients must be finite"));
                }
            }
            (Valuation::LinearMultiD { a, c }, Supply::UniformCube { dim }) => {
                if a.len() != self.n || c.len() != self.n {
                    return Err(Error::DimensionMismatch("valuation coefficients differ from n"));
                }
                if dim == 0 || a.iter().any(|row| row.len() != dim) {
                    return Err(Error::DimensionMismatch("coefficient vectors differ from supply dim"));
                }
                if a.iter().flatten().chain(c).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("valuation coefficients must be finite"));
                }
            }
            _ => return Err(Error::DimensionMismatch("valuation kind does not match supply")),
        }
        for buyer in 0..self.n {
            if self.min_value(buyer) < 0.0 {
                return Err(Error::NegativeValuation { buyer });
            }
            if self.mean_value(buyer) <= 0.0 {
                return Err(Error::ZeroMeanValuation { buyer });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.supply.dim()
    }

    /// `v_i(θ)`; `theta` must have `dim()` coordinates.
    pub fn value(&self, buyer: usize, theta: &[f64]) -> f64 {
        match &self.valuation {
            Valuation::Linear1D { c, d } => c[buyer] * theta[0] + d[buyer],
            Valuation::LinearMultiD { a, c } => {
                a[buyer].iter().zip(theta).map(|(x, y)| x * y).sum::<f64>() + c[buyer]
            }
        }
    }

    /// Mean of `v_i` under the supply distribution.
    pub fn mean_value(&self, buyer: usize) -> f64 {
        match &self.valuation {
            Valuation::Linear1D { c, d } => c[buyer] / 2.0 + d[buyer],
            Valuation::LinearMultiD { a, c } => a[buyer].iter().sum::<f64>() / 2.0 + c[buyer],
        }
    }

    pub fn max_value(&self, buyer: usize) -> f64 {
        match &self.valuation {
            Valuation::Linear1D { c, d } => d[buyer] + c[buyer].max(0.0),
            Valuation::LinearMultiD { a, c } => {
                c[buyer] + a[buyer].iter().map(|x| x.max(0.0)).sum::<f64>()
            }
        }
    }

    pub fn min_value(&self, buyer: usize) -> f64 {
        match &self.valuation {
            Valuation::Linear1D { c, d } => d[buyer] + c[buyer].min(0.0),
            Valuation::LinearMultiD { a, c } => {
                c[buyer] + a[buyer].iter().map(|x| x.min(0.0)).sum::<f64>()
            }
        }
    }

    /// `v̄ = max_i sup_θ v_i(θ)`.
    pub fn vbar(&self) -> f64 {
        (0..self.n).map(|i| self.max_value(i)).fold(0.0, f64::max)
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    pub fn values_normalized(&self) -> bool {
        (0..self.n).all(|i| (self.mean_value(i) - 1.0).abs() <= NORMALIZATION_TOL)
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_budget() - 1.0).abs() <= NORMALIZATION_TOL && self.values_normalized()
    }

    /// Slopes and intercepts of a one-dimensional linear spec.
    pub fn linear_1d_coefficients(&self) -> Option<(&[f64], &[f64])> {
        match &self.valuation {
            Valuation::Linear1D { c, d } => Some((c, d)),
            Valuation::LinearMultiD { .. } => None,
        }
    }

    pub fn intercepts_strictly_decreasing(&self) -> bool {
        self.linear_1d_coefficients()
            .is_some_and(|(_, d)| d.windows(2).all(|w| w[0] > w[1]))
    }

    fn scale_valuations(&mut self) {
        let means: Vec<f64> = (0..self.n).map(|i| self.mean_value(i)).collect();
        match &mut self.valuation {
            Valuation::Linear1D { c, d } => {
                for (i, m) in means.iter().enumerate() {
                    c[i] /= m;
                    d[i] /= m;
                }
            }
            Valuation::LinearMultiD { a, c } => {
                for (i, m) in means.iter().enumerate() {
                    a[i].iter_mut().for_each(|x| *x /= m);
                    c[i] /= m;
                }
            }
        }
    }
}

/// Rescales budgets to sum to one and every valuation to unit mean.
pub fn normalize_spec(spec: &LongRunSpec) -> Result<LongRunSpec> {
    spec.validate()?;
    let mut out = spec.clone();
    let total = out.total_budget();
    out.budgets.iter_mut().for_each(|b| *b /= total);
    out.scale_valuations();
    Ok(out)
}

/// Rescales valuations only. Quasilinear markets keep their budgets as given.
pub fn normalize_values(spec: &LongRunSpec) -> Result<LongRunSpec> {
    spec.validate()?;
    let mut out = spec.clone();
    out.scale_valuations();
    Ok(out)
}

/// A priori bounds on the long-run pacing multipliers and the box `C` built
/// from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqBounds {
    pub lower: Vec<f64>,
    pub upper: f64,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

impl EqBounds {
    pub fn contains(&self, beta: &[f64]) -> bool {
        beta.len() == self.box_lo.len()
            && beta
                .iter()
                .zip(self.box_lo.iter().zip(&self.box_hi))
                .all(|(b, (lo, hi))| lo <= b && b <= hi)
    }
}

pub fn eq_bounds(spec: &LongRunSpec) -> Result<EqBounds> {
    if !spec.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let means: Vec<f64> = (0..spec.n).map(|i| spec.mean_value(i)).collect();
    let lower: Vec<f64> = spec.budgets.iter().zip(&means).map(|(b, m)| b / m).collect();
    let min_mean = means.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = spec.total_budget() / min_mean;
    Ok(EqBounds {
        box_lo: lower.iter().map(|l| l / 2.0).collect(),
        box_hi: alloc::vec![2.0 * upper; spec.n],
        lower,
        upper,
    })
}
