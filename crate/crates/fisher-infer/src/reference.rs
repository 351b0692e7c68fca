//! Long-run reference values for one-dimensional linear specs.

use anyhow::{bail, Result};
use fisher_core::{
    asymptotic_pack, solve_longrun_eg, solve_longrun_qeg, AsymptoticPack, LongRunEquilibrium, LongRunSpec,
    QuasiLongRunEquilibrium, Valuation,
};
use serde::{Deserialize, Serialize};

/// Long-run equilibrium with multipliers in the input market's buyer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub beta_star: Vec<f64>,
    pub u_star: Vec<f64>,
    pub nsw_star: f64,
    pub sigma2_nsw: f64,
    pub omega2: Vec<f64>,
    /// Buyer order used by the solver: `order[k]` is the original index of
    /// the buyer winning the `k`-th interval.
    pub order: Vec<usize>,
    #[serde(skip)]
    pub equilibrium: Option<LongRunEquilibrium>,
    /// Absent when the dual is not twice differentiable at the optimum.
    pub asymptotics: Option<AsymptoticPack>,
}

/// Buyers sorted by decreasing intercept, as the long-run solver requires.
fn sorted_spec(spec: &LongRunSpec) -> Result<Option<(LongRunSpec, Vec<usize>)>> {
    let Valuation::Linear1D { c, d } = &spec.valuation else {
        return Ok(None);
    };
    let mut order: Vec<usize> = (0..spec.n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let sorted = LongRunSpec::linear_1d(
        order.iter().map(|&i| spec.budgets[i]).collect(),
        order.iter().map(|&i| c[i]).collect(),
        order.iter().map(|&i| d[i]).collect(),
    )?;
    Ok(Some((sorted, order)))
}

fn unpermute(order: &[usize], sorted: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = sorted[k];
    }
    out
}

fn permute_matrix(order: &[usize], m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = order.len();
    let mut out = vec![vec![0.0; n]; n];
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            out[i][j] = m[a][b];
        }
    }
    out
}

/// Long-run reference of a normalized linear spec; `None` when the
/// valuation is not one-dimensional linear.
pub fn linear_reference(spec: &LongRunSpec, tol: f64) -> Result<Option<Reference>> {
    let Some((sorted, order)) = sorted_spec(spec)? else {
        return Ok(None);
    };
    if !sorted.intercepts_strictly_decreasing() {
        bail!("long-run solver needs distinct intercepts");
    }
    let eq = solve_longrun_eg(&sorted, tol)?;
    let pack = asymptotic_pack(&sorted, &eq).ok().map(|p| AsymptoticPack {
        sigma2_nsw: p.sigma2_nsw,
        omega2: unpermute(&order, &p.omega2),
        hessian: permute_matrix(&order, &p.hessian),
        sigma_beta: permute_matrix(&order, &p.sigma_beta),
        sigma_u: permute_matrix(&order, &p.sigma_u),
        score_cov: permute_matrix(&order, &p.score_cov),
        sigma_beta_full: permute_matrix(&order, &p.sigma_beta_full),
        sigma_u_full: permute_matrix(&order, &p.sigma_u_full),
    });
    let omega2 = (0..spec.n).map(|i| fisher_core::omega2(&eq, i)).collect::<fisher_core::Result<Vec<_>>>()?;
    Ok(Some(Reference {
        beta_star: unpermute(&order, &eq.beta_star),
        u_star: unpermute(&order, &eq.u_star),
        nsw_star: eq.nsw_star,
        sigma2_nsw: fisher_core::sigma2_nsw(&eq),
        omega2: unpermute(&order, &omega2),
        order,
        equilibrium: Some(eq),
        asymptotics: pack,
    }))
}

/// Quasilinear long-run revenue and multipliers in the input market's buyer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiReference {
    pub beta_star: Vec<f64>,
    pub leftover: Vec<f64>,
    pub rev_star: f64,
}

pub fn quasi_reference(spec: &LongRunSpec, tol: f64) -> Result<Option<QuasiReference>> {
    let Some((sorted, order)) = sorted_spec(spec)? else {
        return Ok(None);
    };
    let QuasiLongRunEquilibrium { equilibrium, leftover, rev } = solve_longrun_qeg(&sorted, tol)?;
    Ok(Some(QuasiReference {
        beta_star: unpermute(&order, &equilibrium.beta_star),
        leftover: unpermute(&order, &leftover),
        rev_star: rev,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fisher_core::fixtures::{random_linear_1d, symmetric_spec};

    #[test]
    fn symmetric_reference() {
        let r = linear_reference(&symmetric_spec(), 1e-12).unwrap().unwrap();
        assert!((r.beta_star[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.nsw_star - 0.75f64.ln()).abs() < 1e-9);
        assert!((r.sigma2_nsw - 1.0 / 27.0).abs() < 1e-9);
    }

    #[test]
    fn reference_is_invariant_to_buyer_order() {
        let spec = random_linear_1d(4, 3);
        let (c, d) = spec.linear_1d_coefficients().unwrap();
        let rev = [3usize, 1, 0, 2];
        let shuffled = LongRunSpec::linear_1d(
            rev.iter().map(|&i| spec.budgets[i]).collect(),
            rev.iter().map(|&i| c[i]).collect(),
            rev.iter().map(|&i| d[i]).collect(),
        )
        .unwrap();
        let a = linear_reference(&spec, 1e-12).unwrap().unwrap();
        let b = linear_reference(&shuffled, 1e-12).unwrap().unwrap();
        assert!((a.nsw_star - b.nsw_star).abs() < 1e-10);
        for (k, &i) in rev.iter().enumerate() {
            assert!((b.beta_star[k] - a.beta_star[i]).abs() < 1e-9);
            let (ha, hb) = (a.asymptotics.as_ref().unwrap(), b.asymptotics.as_ref().unwrap());
            for (l, &j) in rev.iter().enumerate() {
                assert!((hb.hessian[k][l] - ha.hessian[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn non_linear_specs_have_no_reference() {
        let spec = fisher_core::fixtures::random_linear_md(2, 2, 1);
        assert!(linear_reference(&spec, 1e-12).unwrap().is_none());
    }
}
