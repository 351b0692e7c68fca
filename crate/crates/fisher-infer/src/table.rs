//! Fixed-column plain-text rendering of an inference report.

use std::fmt::Write;

use fisher_core::InferenceReport;

pub fn render_report(r: &InferenceReport) -> String {
    let mut out = String::new();
    let level = 100.0 * (1.0 - r.alpha);
    let _ = writeln!(out, "t = {}   level = {level:.1}%   split items = {}", r.t, r.split_items);
    let _ = writeln!(
        out,
        "NSW  {:>14.8}   sigma2 {:>12.6e}   CI [{:>14.8}, {:>14.8}]",
        r.nsw_hat, r.sigma2_nsw_hat, r.nsw_ci.lo, r.nsw_ci.hi
    );
    if let Some(rev) = r.rev_hat {
        let _ = writeln!(out, "REV  {rev:>14.8}");
    }
    if let Some(eta) = r.eta {
        let _ = writeln!(out, "numerical Hessian with eta = {eta:.6e}");
    }
    let _ = writeln!(
        out,
        "{:>5} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "buyer", "beta", "beta_lo", "beta_hi", "u", "u_lo", "u_hi", "omega2"
    );
    for i in 0..r.beta_hat.len() {
        let _ = writeln!(
            out,
            "{:>5} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            i + 1,
            r.beta_hat[i],
            r.beta_ci[i].lo,
            r.beta_ci[i].hi,
            r.u_hat[i],
            r.u_ci[i].lo,
            r.u_ci[i].hi,
            r.omega2_hat[i]
        );
    }
    out
}
