//! Reference markets and seeded market generators.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::Result;
use crate::sampling::{item_rng, unit_uniform};
use crate::spec::{normalize_spec, LongRunSpec};

/// Two buyers with budgets `(1/2, 1/2)` and values `2 − 2θ` and `2θ`.
pub fn symmetric_spec() -> LongRunSpec {
    LongRunSpec::linear_1d(alloc::vec![0.5, 0.5], alloc::vec![-2.0, 2.0], alloc::vec![2.0, 0.0])
        .expect("valid symmetric spec")
}

/// Single buyer with unit budget and constant value one.
pub fn single_buyer_spec(budget: f64) -> Result<LongRunSpec> {
    LongRunSpec::linear_1d(alloc::vec![budget], alloc::vec![0.0], alloc::vec![1.0])
}

/// Random one-dimensional linear market, normalized, with buyers ordered by
/// strictly decreasing intercept.
///
/// Slopes are uniform on `[-2, 2]`, intercepts on `[0, 2]` and budgets on
/// `[0.5, 1.5]`; draws with a valuation negative somewhere on `[0, 1]` or
/// with zero mean are rejected.
pub fn random_linear_1d(n: usize, seed: u64) -> LongRunSpec {
    let mut rng = item_rng(seed, u64::MAX);
    loop {
        let mut buyers: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
        while buyers.len() < n {
            let c = 4.0 * unit_uniform(&mut rng) - 2.0;
            let d = 2.0 * unit_uniform(&mut rng);
            let b = 0.5 + unit_uniform(&mut rng);
            if d >= 0.0 && c + d >= 0.0 && c / 2.0 + d > 1e-3 {
                buyers.push((c, d, b));
            }
        }
        let raw = LongRunSpec::linear_1d(
            buyers.iter().map(|x| x.2).collect(),
            buyers.iter().map(|x| x.0).collect(),
            buyers.iter().map(|x| x.1).collect(),
        )
        .expect("generated coefficients are valid");
        let spec = normalize_spec(&raw).expect("generated spec normalizes");
        let (c, d) = spec.linear_1d_coefficients().expect("one-dimensional");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        let sorted = LongRunSpec::linear_1d(
            order.iter().map(|&i| spec.budgets[i]).collect(),
            order.iter().map(|&i| c[i]).collect(),
            order.iter().map(|&i| d[i]).collect(),
        )
        .expect("permuted spec is valid");
        if sorted.intercepts_strictly_decreasing() {
            return sorted;
        }
    }
}

/// Random multi-dimensional linear market on `[0, 1]^dim`, normalized.
///
/// Coefficients are uniform on `[-1, 1]` and intercepts on `[0, 1]`; draws
/// negative somewhere on the cube are rejected.
pub fn random_linear_md(n: usize, dim: usize, seed: u64) -> LongRunSpec {
    let mut rng = item_rng(seed, u64::MAX - 1);
    let mut a = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut budgets = Vec::with_capacity(n);
    while a.len() < n {
        let row: Vec<f64> = (0..dim).map(|_| 2.0 * unit_uniform(&mut rng) - 1.0).collect();
        let intercept = unit_uniform(&mut rng);
        let budget = 0.5 + unit_uniform(&mut rng);
        let min: f64 = intercept + row.iter().map(|x| x.min(0.0)).sum::<f64>();
        let mean: f64 = intercept + row.iter().sum::<f64>() / 2.0;
        if min >= 0.0 && mean > 1e-3 {
            a.push(row);
            c.push(intercept);
            budgets.push(budget);
        }
    }
    let raw = LongRunSpec::linear_md(budgets, a, c).expect("generated coefficients are valid");
    normalize_spec(&raw).expect("generated spec normalizes")
}

/// Draws a value pair uniformly from the union of the triangles
/// `{v ≥ 0 : v_2 ≤ 1, v_2 ≥ 2 v_1}` and `{v ≥ 0 : v_1 ≤ 1, v_2 ≤ v_1 / 2}`,
/// which have equal area.
pub fn continuous_values_draw<R: RngCore>(rng: &mut R) -> [f64; 2] {
    let first = unit_uniform(rng) < 0.5;
    let (mut r1, mut r2) = (unit_uniform(rng), unit_uniform(rng));
    if r1 + r2 > 1.0 {
        r1 = 1.0 - r1;
        r2 = 1.0 - r2;
    }
    // Vertices (0,0), P, Q of the chosen triangle.
    let (p, q) = if first { ([0.0, 1.0], [0.5, 1.0]) } else { ([1.0, 0.0], [1.0, 0.5]) };
    [r1 * p[0] + r2 * q[0], r1 * p[1] + r2 * q[1]]
}

/// `E[max(β_1 v_1, β_2 v_2)]` for the triangle example when
/// `β_2/2 ≤ β_1 ≤ 2 β_2`, where each buyer always wins its own triangle.
pub fn continuous_values_mean_max(beta: [f64; 2]) -> f64 {
    (beta[0] + beta[1]) / 3.0
}
