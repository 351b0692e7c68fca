//! One-sample Kolmogorov–Smirnov test against a normal law.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::normal::normal_cdf;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_stat: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Largest matrix order used by the exact evaluation.
const MAX_EXACT_ORDER: usize = 401;

/// Two-sided test of `samples` against `N(mu, sigma²)`.
pub fn ks_normal_test(samples: &[f64], mu: f64, sigma: f64) -> Result<KsResult> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput("sigma must be positive and finite"));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("KS test needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN"));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mu) / sigma).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in z.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(KsResult { d_stat: d, p_value: kolmogorov_sf(d, n), n })
}

/// `P(D_n ≥ d)` for the two-sided statistic of `n` samples.
///
/// Uses the exact Marsaglia–Tsang–Wang matrix evaluation when the matrix is
/// small, their tail approximation deep in the tail, and Kolmogorov's limit
/// with Stephens' finite-sample correction otherwise.
pub fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    if n == 0 || d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let s = d * d * nf;
    if s > 7.24 || (s > 3.76 && n > 99) {
        let p = 2.0 * libm::exp(-(2.000071 + 0.331 / libm::sqrt(nf) + 1.409 / nf) * s);
        return p.clamp(0.0, 1.0);
    }
    let k = (nf * d) as usize + 1;
    if 2 * k - 1 <= MAX_EXACT_ORDER {
        return (1.0 - mtw_cdf(n, d)).clamp(0.0, 1.0);
    }
    let sq = libm::sqrt(nf);
    kolmogorov_limit_sf(d * (sq + 0.12 + 0.11 / sq))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_limit_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges slowly here; the sum is 1 to
        // double precision.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = libm::exp(-2.0 * kf * kf * lambda * lambda);
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Matrix with a power-of-ten exponent kept separately.
struct Scaled {
    m: Vec<f64>,
    exp: i32,
}

fn mat_mul(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order * order];
    for i in 0..order {
        for k in 0..order {
            let aik = a[i * order + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * order..(k + 1) * order];
            let out = &mut c[i * order..(i + 1) * order];
            for j in 0..order {
                out[j] += aik * row[j];
            }
        }
    }
    c
}

fn rescale(s: &mut Scaled, order: usize) {
    if s.m[(order / 2) * order + order / 2] > 1e140 {
        s.m.iter_mut().for_each(|x| *x *= 1e-140);
        s.exp += 140;
    }
}

fn mat_pow(h: &[f64], order: usize, n: usize) -> Scaled {
    if n == 1 {
        return Scaled { m: h.to_vec(), exp: 0 };
    }
    let half = mat_pow(h, order, n / 2);
    let mut sq = Scaled { m: mat_mul(&half.m, &half.m, order), exp: 2 * half.exp };
    if n % 2 == 1 {
        sq = Scaled { m: mat_mul(h, &sq.m, order), exp: sq.exp };
    }
    rescale(&mut sq, order);
    sq
}

/// `P(D_n < d)` by the Marsaglia–Tsang–Wang method.
fn mtw_cdf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= libm::pow(h, (i + 1) as f64);
        hm[(m - 1) * m + i] -= libm::pow(h, (m - i) as f64);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += libm::pow(2.0 * h - 1.0, m as f64);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let q = mat_pow(&hm, m, n);
    let mut s = q.m[(k - 1) * m + k - 1];
    let mut exp = q.exp;
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            exp -= 140;
        }
    }
    s * libm::pow(10.0, exp as f64)
}
