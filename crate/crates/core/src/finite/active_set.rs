//! Exact equilibrium recovery from an approximate minimizer.
//!
//! Near the minimizer, items whose top two bids nearly coincide are the ones
//! split between buyers at equilibrium. Given a guess of which (buyer, item)
//! pairs tie, the equilibrium solves a square linear system in the
//! multipliers and the spending on tied items:
//!
//! * budget: `β_i A_i + Σ_τ y_iτ = b_i` (or `β_i = 1` for a capped buyer),
//! * tie: `β_o v_oτ − β_i v_iτ = 0` for each tied buyer `i` of item `τ` owned by `o`,
//! * supply: `Σ_i y_iτ = w_τ β_o v_oτ`,
//!
//! where `A_i` is the supply-weighted value of items buyer `i` wins outright.
//! Tie guesses are grown in order of increasing relative bid gap along a
//! spanning forest of buyers; a candidate is accepted only if it satisfies
//! every equilibrium condition, so an accepted answer is exact up to
//! roundoff regardless of how good the guess was.

use alloc::vec;
use alloc::vec::Vec;

use super::compact::Compact;
use crate::linalg::{self, Matrix};

/// Largest relative bid gap treated as a possible tie.
const CANDIDATE_GAP: f64 = 1e-5;
/// Relative slack allowed when checking that owners outbid everyone.
const VERIFY_REL: f64 = 1e-12;

pub(crate) struct Exact {
    pub beta: Vec<f64>,
    pub alloc: Vec<f64>,
}

enum Outcome {
    Found(Exact),
    Cap(usize),
    Uncap(usize),
    Fail,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
}

pub(crate) fn identify(c: &Compact, beta: &[f64], quasi: bool) -> Option<Exact> {
    let n = c.n;
    let m = c.m();
    let owner: Vec<usize> = (0..m).map(|j| c.top(beta, j).1).collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for j in 0..m {
        let col = c.col(j);
        let o = owner[j];
        let p = beta[o] * col[o];
        for i in 0..n {
            if i != o && col[i] > 0.0 {
                let gap = (p - beta[i] * col[i]) / p;
                if gap <= CANDIDATE_GAP {
                    candidates.push((gap, i, j));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf = UnionFind((0..n).collect());
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &(_, i, j) in &candidates {
        if edges.len() + 1 >= n {
            break;
        }
        let (ri, ro) = (uf.find(i), uf.find(owner[j]));
        if ri != ro {
            uf.0[ri] = ro;
            edges.push((i, j));
        }
    }
    let initial: Vec<bool> = (0..n).map(|i| quasi && beta[i] >= 1.0 - 1e-12).collect();
    for k in 0..=edges.len() {
        let mut capped = initial.clone();
        for _ in 0..=n {
            match attempt(c, &owner, &edges[..k], &capped, quasi) {
                Outcome::Found(e) => return Some(e),
                Outcome::Cap(i) if !capped[i] => capped[i] = true,
                Outcome::Uncap(i) if capped[i] => capped[i] = false,
                _ => break,
            }
        }
    }
    None
}

fn attempt(c: &Compact, owner: &[usize], edges: &[(usize, usize)], capped: &[bool], quasi: bool) -> Outcome {
    let n = c.n;
    let m = c.m();
    // Tied items with their participating buyers, owner first.
    let mut tie_of = vec![usize::MAX; m];
    let mut ties: Vec<(usize, Vec<usize>)> = Vec::new();
    for &(i, j) in edges {
        if tie_of[j] == usize::MAX {
            tie_of[j] = ties.len();
            ties.push((j, vec![owner[j]]));
        }
        ties[tie_of[j]].1.push(i);
    }
    let mut owned = vec![0.0; n];
    for j in 0..m {
        if tie_of[j] == usize::MAX {
            owned[owner[j]] += c.weight[j] * c.col(j)[owner[j]];
        }
    }
    let mut offsets = Vec::with_capacity(ties.len());
    let mut size = n;
    for (_, members) in &ties {
        offsets.push(size);
        size += members.len();
    }
    let mut a = Matrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for i in 0..n {
        if capped[i] {
            a[(i, i)] = 1.0;
            rhs[i] = 1.0;
        } else {
            a[(i, i)] = owned[i];
            rhs[i] = c.budgets[i];
        }
    }
    let mut row = n;
    for (t, (j, members)) in ties.iter().enumerate() {
        let col = c.col(*j);
        let o = members[0];
        for (s, &i) in members.iter().enumerate() {
            if !capped[i] {
                a[(i, offsets[t] + s)] = 1.0;
            }
            if s > 0 {
                a[(row, o)] = col[o];
                a[(row, i)] = -col[i];
                row += 1;
            }
        }
        for s in 0..members.len() {
            a[(row, offsets[t] + s)] = 1.0;
        }
        a[(row, o)] = -c.weight[*j] * col[o];
        row += 1;
    }
    debug_assert_eq!(row, size);
    let Some(sol) = linalg::solve_general(a, &rhs) else {
        return Outcome::Fail;
    };
    let mut beta = sol[..n].to_vec();
    for i in 0..n {
        if beta[i] <= 0.0 {
            return Outcome::Fail;
        }
        if quasi && !capped[i] && beta[i] > 1.0 + 1e-12 {
            return Outcome::Cap(i);
        }
        if quasi {
            beta[i] = beta[i].min(1.0);
        }
    }
    let mut spend = owned.iter().zip(&beta).map(|(a, b)| a * b).collect::<Vec<f64>>();
    for (t, (j, members)) in ties.iter().enumerate() {
        let p = beta[members[0]] * c.col(*j)[members[0]];
        for (s, &i) in members.iter().enumerate() {
            let y = sol[offsets[t] + s];
            if y < -1e-12 * p * c.weight[*j] {
                return Outcome::Fail;
            }
            spend[i] += y.max(0.0);
        }
    }
    for i in 0..n {
        if capped[i] && spend[i] > c.budgets[i] * (1.0 + 1e-12) {
            return Outcome::Uncap(i);
        }
    }
    for j in 0..m {
        let col = c.col(j);
        let o = owner[j];
        let p = beta[o] * col[o];
        let limit = p * (1.0 + VERIFY_REL);
        if (0..n).any(|i| beta[i] * col[i] > limit) {
            return Outcome::Fail;
        }
    }
    let mut alloc = vec![0.0; m * n];
    for j in 0..m {
        if tie_of[j] == usize::MAX {
            alloc[j * n + owner[j]] = c.weight[j];
        }
    }
    for (t, (j, members)) in ties.iter().enumerate() {
        let ys: Vec<f64> = (0..members.len()).map(|s| sol[offsets[t] + s].max(0.0)).collect();
        let total: f64 = ys.iter().sum();
        if total <= 0.0 {
            return Outcome::Fail;
        }
        for (s, &i) in members.iter().enumerate() {
            alloc[j * n + i] += ys[s] / total * c.weight[*j];
        }
    }
    Outcome::Found(Exact { beta, alloc })
}
