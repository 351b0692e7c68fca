use alloc::vec;
use alloc::vec::Vec;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::market::dual_value_sample;
use crate::sampling::{item_rng, unit_uniform};

fn market(rows: &[&[f64]], budgets: &[f64]) -> FiniteMarket {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    FiniteMarket::from_rows(&rows, budgets.to_vec()).unwrap()
}

fn random_market(n: usize, t: usize, seed: u64) -> FiniteMarket {
    let mut rng = item_rng(seed, 0);
    let values: Vec<f64> = (0..n * t).map(|_| unit_uniform(&mut rng)).collect();
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + unit_uniform(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    FiniteMarket::from_parts(n, t, values, raw.iter().map(|b| b / total).collect(), None).unwrap()
}

fn amounts(eq_x: &[Share], t: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; t];
    for s in eq_x {
        out[s.item][s.buyer] += s.amount;
    }
    out
}

fn check_invariants(m: &FiniteMarket, eq: &FiniteEquilibrium, tol: f64) {
    let n = m.n();
    let t = m.t();
    let vbar = m.mean_values();
    let total = m.total_budget();
    for i in 0..n {
        assert_eq!(eq.u[i], m.budgets()[i] / eq.beta[i]);
        assert!(eq.u[i] <= vbar[i] * (1.0 + 1e-9));
        assert!(eq.u[i] >= m.budgets()[i] / total * vbar[i] * (1.0 - 1e-9));
    }
    let x = amounts(&eq.x, t, n);
    for item in 0..t {
        let s: f64 = x[item].iter().sum();
        assert!((s - m.supply()).abs() <= 1e-9, "item {item} sums to {s}");
        let top = (0..n).map(|i| eq.beta[i] * m.value(i, item)).fold(0.0, f64::max);
        assert_eq!(eq.p[item], top);
    }
    assert!(eq.x.iter().all(|s| s.amount >= 0.0));
    let revenue: f64 = eq.p.iter().sum::<f64>() * m.supply();
    assert!((revenue - total).abs() <= 1e-8, "revenue {revenue}");
    assert!(eq.certificate.certified);
    assert!(eq.certificate.duality_gap <= tol);
    assert!(eq.certificate.duality_gap >= -1e-10);
    let constant: f64 = m.budgets().iter().map(|b| b * (b.ln() - 1.0)).sum();
    let h = dual_value_sample(m, &eq.beta).unwrap();
    assert!((eq.nsw - h - constant).abs() <= 10.0 * tol);
}

#[test]
fn favorite_items_example() {
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5]);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(eq.beta[0], 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.beta[1], 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.u[0], 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.p[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.p[1], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.nsw, 1.5f64.ln(), epsilon = 1e-12);
    let x = amounts(&eq.x, 2, 2);
    assert_abs_diff_eq!(x[0][0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(x[1][1], 0.5, epsilon = 1e-12);
    check_invariants(&m, &eq, 1e-9);
}

#[test]
fn tie_split_example() {
    let m = market(&[&[2.0], &[1.0]], &[0.5, 0.5]);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(eq.beta[0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.beta[1], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.p[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.u[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.u[1], 0.5, epsilon = 1e-12);
    let x = amounts(&eq.x, 1, 2);
    assert_abs_diff_eq!(x[0][0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(x[0][1], 0.5, epsilon = 1e-12);
    assert!(eq.certificate.exact);
    check_invariants(&m, &eq, 1e-9);
}

#[test]
fn single_buyer_closed_form() {
    let m = market(&[&[1.0, 1.0, 1.0]], &[1.0]);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    assert_eq!(eq.beta, vec![1.0]);
    assert_eq!(eq.u, vec![1.0]);
    assert_eq!(eq.nsw, 0.0);
    check_invariants(&m, &eq, 1e-9);
}

#[test]
fn buyer_without_value_rejected() {
    let m = market(&[&[1.0, 2.0], &[0.0, 0.0]], &[0.5, 0.5]);
    assert_eq!(solve_sample_eg(&m, &SolveOptions::default()), Err(Error::NoPositiveValue { buyer: 1 }));
    assert!(solve_sample_qeg(&m, &SolveOptions::default()).is_err());
}

#[test]
fn worthless_items_clear_at_zero() {
    let m = market(&[&[1.0, 0.0, 2.0], &[2.0, 0.0, 1.0]], &[0.5, 0.5]);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    assert_eq!(eq.p[1], 0.0);
    assert!(verify_kkt(&m, &eq, 1e-9).unwrap().passed);
}

#[test]
fn quasilinear_single_buyer_examples() {
    let m = market(&[&[1.0, 1.0]], &[2.0]);
    let eq = solve_sample_qeg(&m, &SolveOptions::default()).unwrap();
    assert_eq!(eq.beta, vec![1.0]);
    assert_abs_diff_eq!(eq.rev, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.leftover[0], 1.0, epsilon = 1e-12);

    let m = market(&[&[1.0, 1.0]], &[0.5]);
    let eq = solve_sample_qeg(&m, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(eq.beta[0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(eq.rev, 0.5, epsilon = 1e-12);
    assert_eq!(eq.leftover[0], 0.0);
}

/// Dense grid search of `H_t` over `(0, hi]²`, refined around the best cell.
fn grid_minimize(m: &FiniteMarket, hi: f64) -> [f64; 2] {
    let mut lo = [1e-4, 1e-4];
    let mut up = [hi, hi];
    let mut best = [0.0; 2];
    for _ in 0..6 {
        let steps = 200;
        let mut best_f = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=steps {
                let beta = [
                    lo[0] + (up[0] - lo[0]) * a as f64 / steps as f64,
                    lo[1] + (up[1] - lo[1]) * b as f64 / steps as f64,
                ];
                let f = dual_value_sample(m, &beta).unwrap();
                if f < best_f {
                    best_f = f;
                    best = beta;
                }
            }
        }
        for k in 0..2 {
            let half = (up[k] - lo[k]) / 20.0;
            lo[k] = (best[k] - half).max(1e-6);
            up[k] = (best[k] + half).min(hi);
        }
    }
    best
}

#[test]
fn grid_search_agrees_with_solver() {
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5]);
    let g = grid_minimize(&m, 2.0);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(g[i], eq.beta[i], epsilon = 1e-4);
    }
}

#[test]
fn quasilinear_grid_search_example() {
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.3, 0.3]);
    let g = grid_minimize(&m, 1.0);
    let eq = solve_sample_qeg(&m, &SolveOptions::default()).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(g[i], eq.beta[i], epsilon = 1e-4);
    }
    let rev: f64 = (0..2)
        .map(|item| (0..2).map(|i| eq.beta[i] * m.value(i, item)).fold(0.0, f64::max))
        .sum::<f64>()
        / 2.0;
    assert_abs_diff_eq!(eq.rev, rev, epsilon = 1e-12);
    assert!(eq.certificate.certified);
}

#[test]
fn kkt_examples() {
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5]);
    let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    let report = verify_kkt(&m, &eq, 1e-8).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.max_residual() < 1e-8);

    let mut bumped = eq.clone();
    bumped.beta[0] += 0.1;
    let report = verify_kkt(&m, &bumped, 1e-8).unwrap();
    let expected = (0.5 / bumped.beta[0] - 1.5f64).abs();
    assert_abs_diff_eq!(report.utility_identity[0], expected, epsilon = 1e-12);
    assert!(report.utility_identity[0] > 0.1);
    assert!(!report.passed);

    let mut over = eq.clone();
    for s in over.x.iter_mut().filter(|s| s.item == 0) {
        s.amount *= 2.0;
    }
    let report = verify_kkt(&m, &over, 1e-8).unwrap();
    assert_abs_diff_eq!(report.feasibility, 0.5, epsilon = 1e-12);

    let mut short = eq.clone();
    short.beta.pop();
    assert!(matches!(verify_kkt(&m, &short, 1e-8), Err(Error::DimensionMismatch(_))));
}

#[test]
fn cross_check_examples() {
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5]);
    assert!(cross_check_solvers(&m, 1e-8).unwrap() < 1e-6);
    let m = market(&[&[1.0, 2.0]], &[1.0]);
    assert_eq!(cross_check_solvers(&m, 1e-8).unwrap(), 0.0);
    let m = random_market(5, 50, 17);
    assert!(cross_check_solvers(&m, 1e-8).unwrap() < 1e-6);
}

#[test]
fn unrefined_backends_make_progress() {
    let m = random_market(3, 40, 5);
    let exact = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    for backend in [Backend::ProportionalResponse, Backend::ProjectedSubgradient] {
        let opts = SolveOptions { refine: false, max_iter: 5000, tol: 1e-6, backend, ..SolveOptions::default() };
        let eq = solve_sample_eg(&m, &opts).unwrap();
        assert!(eq.certificate.duality_gap >= -1e-10);
        for i in 0..3 {
            assert!((eq.beta[i] - exact.beta[i]).abs() < 1e-2, "{backend:?}: {:?} vs {:?}", eq.beta, exact.beta);
        }
    }
}

#[test]
fn iteration_limit_flags_uncertified() {
    let m = random_market(4, 60, 9);
    let opts = SolveOptions { refine: false, max_iter: 3, ..SolveOptions::default() };
    let eq = solve_sample_eg(&m, &opts).unwrap();
    assert!(!eq.certificate.certified);
}

#[test]
fn larger_markets_certify() {
    for (n, t, seed) in [(5, 5000, 1), (50, 2000, 2), (2, 20000, 3)] {
        let m = random_market(n, t, seed);
        let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
        assert!(eq.certificate.exact, "n={n} t={t}");
        check_invariants(&m, &eq, 1e-9);
        assert!(verify_kkt(&m, &eq, 1e-8).unwrap().passed);
    }
}

#[test]
fn quasilinear_interior_matches_linear() {
    // Small budgets keep every multiplier below one.
    let m = random_market(4, 300, 21);
    let m = m.with_budgets(m.budgets().iter().map(|b| 0.1 * b).collect()).unwrap();
    let eg = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    assert!(eg.beta.iter().all(|&b| b < 1.0));
    let qeg = solve_sample_qeg(&m, &SolveOptions::default()).unwrap();
    for i in 0..4 {
        assert_abs_diff_eq!(eg.beta[i], qeg.beta[i], epsilon = 1e-8);
    }
}

#[test]
fn quasilinear_capped_buyers_satisfy_projected_conditions() {
    let m = random_market(4, 400, 33);
    let m = m.with_budgets(vec![2.0, 0.05, 1.0, 0.1]).unwrap();
    let eq = solve_sample_qeg(&m, &SolveOptions::default()).unwrap();
    assert!(eq.certificate.certified, "{:?}", eq.certificate);
    let g = crate::market::dual_subgradient_sample(&m, &eq.beta).unwrap();
    let vbar = m.mean_values();
    for i in 0..4 {
        assert!(eq.beta[i] <= 1.0);
        assert!(eq.beta[i] >= m.budgets()[i] / (vbar[i] + m.budgets()[i]) - 1e-12);
        assert!(eq.leftover[i] >= 0.0);
        assert!((eq.leftover[i] * (1.0 - eq.beta[i])).abs() <= 1e-8);
        if eq.beta[i] < 1.0 {
            assert!(eq.leftover[i] == 0.0);
        } else {
            assert!(g[i] <= 1e-9, "capped buyer {i} gradient {}", g[i]);
        }
    }
    assert!(eq.beta.contains(&1.0));
    assert!((eq.rev + eq.leftover.iter().sum::<f64>() - m.total_budget()).abs() <= 1e-8);
    assert!(verify_kkt(&m, &eq, 1e-8).unwrap().passed);
}

#[test]
fn duplicated_items_leave_equilibrium_unchanged() {
    let m = random_market(3, 80, 44);
    let n = m.n();
    let t = m.t();
    let mut values = Vec::with_capacity(2 * n * t);
    for i in 0..n {
        values.extend_from_slice(m.row(i));
        values.extend_from_slice(m.row(i));
    }
    let doubled = FiniteMarket::from_parts(n, 2 * t, values, m.budgets().to_vec(), None).unwrap();
    let a = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
    let b = solve_sample_eg(&doubled, &SolveOptions::default()).unwrap();
    for i in 0..n {
        assert_abs_diff_eq!(a.beta[i], b.beta[i], epsilon = 2e-9);
        assert_abs_diff_eq!(a.u[i], b.u[i], epsilon = 2e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn budget_scaling_scales_prices(seed in 0u64..10_000, n in 2usize..5, t in 2usize..40, scale in 0.1f64..10.0) {
        let m = random_market(n, t, seed);
        let scaled = m.with_budgets(m.budgets().iter().map(|b| b * scale).collect()).unwrap();
        let a = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
        let b = solve_sample_eg(&scaled, &SolveOptions::default()).unwrap();
        for item in 0..t {
            prop_assert!((b.p[item] - scale * a.p[item]).abs() <= 1e-8 * scale.max(1.0));
        }
        let xa = amounts(&a.x, t, n);
        let xb = amounts(&b.x, t, n);
        for item in 0..t {
            for i in 0..n {
                prop_assert!((xa[item][i] - xb[item][i]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn certified_solves_satisfy_invariants(seed in 0u64..10_000, n in 1usize..6, t in 1usize..60) {
        let m = random_market(n, t, seed);
        if (0..n).any(|i| !m.row(i).iter().any(|&v| v > 0.0)) {
            return Ok(());
        }
        let eq = solve_sample_eg(&m, &SolveOptions::default()).unwrap();
        check_invariants(&m, &eq, 1e-9);
        prop_assert!(verify_kkt(&m, &eq, 1e-8).unwrap().passed);
    }

    #[test]
    fn duality_gap_is_never_negative(seed in 0u64..10_000, iters in 1usize..200) {
        let m = random_market(3, 30, seed);
        for backend in [Backend::ProportionalResponse, Backend::ProjectedSubgradient] {
            let opts = SolveOptions { refine: false, max_iter: iters, backend, ..SolveOptions::default() };
            let eq = solve_sample_eg(&m, &opts).unwrap();
            prop_assert!(eq.certificate.duality_gap >= -1e-10);
            let q = solve_sample_qeg(&m, &opts).unwrap();
            prop_assert!(q.certificate.duality_gap >= -1e-10);
        }
    }
}

#[test]
fn discrete_values_without_ties_have_zero_curvature() {
    // No ties at the equilibrium of a discrete market, so the envelope term
    // is locally linear and only the log barrier curves.
    let m = market(&[&[3.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5]);
    let beta = solve_sample_eg(&m, &SolveOptions::default()).unwrap().beta;
    let h = 1e-6;
    for j in 0..2 {
        let mut up = beta.clone();
        let mut dn = beta.clone();
        up[j] += h;
        dn[j] -= h;
        let gu = crate::market::dual_subgradient_sample(&m, &up).unwrap();
        let gd = crate::market::dual_subgradient_sample(&m, &dn).unwrap();
        for i in 0..2 {
            let barrier = if i == j { m.budgets()[i] / (beta[i] * beta[i]) } else { 0.0 };
            assert_abs_diff_eq!((gu[i] - gd[i]) / (2.0 * h) - barrier, 0.0, epsilon = 1e-4);
        }
    }
}

