//! A small dense two-phase simplex solver.
//!
//! Solves `min cᵀx` subject to `A x = b` and `0 <= x <= u` (entries of `u`
//! may be infinite). Bland's rule is used throughout, so the method cannot
//! cycle; it is meant for the handful of variables that appear in envelope
//! and value-iteration subproblems, not for large models.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimises `cost` over the current basis using columns `< allowed`.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j] - self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rows[i][j]).sum::<f64>();
                if reduced < -1e-10 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return Err(Error::Lp("unbounded")) };
            self.pivot(r, col);
        }
    }
}

/// Solves the program; errors if it is infeasible or unbounded.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.c.len();
    if lp.upper.len() != n || lp.a_eq.len() != lp.b_eq.len() || lp.a_eq.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("malformed"));
    }
    let bounded: Vec<usize> = (0..n).filter(|&j| lp.upper[j].is_finite()).collect();
    if bounded.iter().any(|&j| lp.upper[j] < 0.0) {
        return Err(Error::Lp("infeasible"));
    }
    // Columns: originals, one slack per finite upper bound, one artificial per row.
    let nv = n + bounded.len();
    let m = lp.a_eq.len() + bounded.len();
    let width = nv + m;
    let mut rows = Vec::with_capacity(m);
    for (a, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(a);
        row[width] = b;
        rows.push(row);
    }
    for (k, &j) in bounded.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[j] = 1.0;
        row[n + k] = 1.0;
        row[width] = lp.upper[j];
        rows.push(row);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        if row[width] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        row[nv + i] = 1.0;
    }
    let mut t = Tableau { rows, basis: (nv..nv + m).collect(), width };

    let mut phase1 = vec![0.0; width];
    phase1[nv..].iter_mut().for_each(|c| *c = 1.0);
    t.optimise(&phase1, width)?;
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= nv).map(|i| t.rhs(i)).sum();
    let scale = 1.0 + lp.b_eq.iter().map(|b| math::abs(*b)).sum::<f64>();
    if infeasibility > 1e-9 * scale {
        return Err(Error::Lp("infeasible"));
    }
    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if t.basis[i] >= nv {
            if let Some(col) = (0..nv).find(|&j| math::abs(t.rows[i][j]) > 1e-9 && !t.basis.contains(&j)) {
                t.pivot(i, col);
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    t.optimise(&cost, nv)?;

    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, objective })
}
