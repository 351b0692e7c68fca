//! Upper envelope of lines on `[0, 1]` and closed-form integrals over it.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Segments narrower than this are dropped.
pub const MIN_SEGMENT: f64 = 1e-14;

/// Piecewise description of `max_i (s_i θ + r_i)` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// `0 = a_0 < a_1 < … < a_m = 1`.
    pub breakpoints: Vec<f64>,
    /// Winning line on each of the `m` segments.
    pub seg_winner: Vec<usize>,
}

impl Envelope {
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.seg_winner
            .iter()
            .enumerate()
            .map(move |(k, &w)| (self.breakpoints[k], self.breakpoints[k + 1], w))
    }

    /// Winner of the segment containing `theta`.
    pub fn winner_at(&self, theta: f64) -> usize {
        let k = self.breakpoints[1..].partition_point(|&a| a < theta);
        self.seg_winner[k.min(self.seg_winner.len() - 1)]
    }
}

/// Upper envelope of `(slope, intercept)` lines over `[0, 1]`.
///
/// The winner at zero is the line with the largest intercept, then the
/// larger slope, then the lowest index. Walking right, the next winner is the
/// line that overtakes the current one first, with the same tie rules.
pub fn upper_envelope(lines: &[(f64, f64)]) -> Envelope {
    assert!(!lines.is_empty(), "envelope of no lines");
    let better = |a: usize, b: usize| {
        // Whether line `a` should replace `b` at a common point.
        let (sa, sb) = (lines[a].0, lines[b].0);
        sa > sb || (sa == sb && a < b)
    };
    let mut current = 0;
    for i in 1..lines.len() {
        let (ri, rc) = (lines[i].1, lines[current].1);
        if ri > rc || (ri == rc && better(i, current)) {
            current = i;
        }
    }
    let mut breakpoints = vec![0.0];
    let mut winners = vec![current];
    let mut x = 0.0;
    loop {
        let (sw, rw) = lines[current];
        let mut next: Option<(f64, usize)> = None;
        for (j, &(sj, rj)) in lines.iter().enumerate() {
            if sj <= sw {
                continue;
            }
            let cross = ((rw - rj) / (sj - sw)).max(x);
            next = match next {
                None => Some((cross, j)),
                Some((c, k)) if cross < c || (cross == c && better(j, k)) => Some((cross, j)),
                keep => keep,
            };
        }
        match next {
            Some((cross, j)) if cross < 1.0 => {
                breakpoints.push(cross);
                winners.push(j);
                x = cross;
                current = j;
            }
            _ => break,
        }
    }
    breakpoints.push(1.0);
    prune(breakpoints, winners)
}

fn prune(breakpoints: Vec<f64>, winners: Vec<usize>) -> Envelope {
    let mut bp = vec![0.0];
    let mut sw: Vec<usize> = Vec::new();
    for (k, &w) in winners.iter().enumerate() {
        let (l, r) = (breakpoints[k], breakpoints[k + 1]);
        if r - l < MIN_SEGMENT {
            continue;
        }
        if sw.last() == Some(&w) {
            *bp.last_mut().unwrap() = r;
        } else {
            if !sw.is_empty() {
                *bp.last_mut().unwrap() = l;
            }
            sw.push(w);
            bp.push(r);
        }
    }
    if sw.is_empty() {
        // Every segment was degenerate; cannot happen for a nonempty walk
        // over [0, 1], but keep the envelope well formed.
        sw.push(winners[0]);
        bp.push(1.0);
    }
    *bp.last_mut().unwrap() = 1.0;
    Envelope { breakpoints: bp, seg_winner: sw }
}

/// `∫_l^r (sθ + r0) dθ`.
pub fn integral_linear(s: f64, r0: f64, l: f64, r: f64) -> f64 {
    0.5 * s * (r * r - l * l) + r0 * (r - l)
}

/// `∫_l^r (sθ + r0)² dθ`.
pub fn integral_square(s: f64, r0: f64, l: f64, r: f64) -> f64 {
    s * s * (r * r * r - l * l * l) / 3.0 + s * r0 * (r * r - l * l) + r0 * r0 * (r - l)
}
