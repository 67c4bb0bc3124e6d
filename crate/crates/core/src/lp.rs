//! Dense revised simplex (two phases) for small linear programs.
//!
//! Minimizes cᵀx subject to row constraints and x ≥ 0 (or free). Dantzig pricing,
//! switching to Bland's rule after a run of degenerate pivots.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal value to each constraint's right-hand side.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            free: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Simplex::build(self).run(self)
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const REINVERT: usize = 60;

struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    flipped: Vec<bool>,
    first_art: usize,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut flipped = vec![false; m];
        let mut b = vec![0.0; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            // a ≥ row with zero right-hand side is negated so its slack can start in the basis
            flipped[i] = c.rhs < 0.0 || (c.rhs == 0.0 && c.cmp == Cmp::Ge);
            b[i] = c.rhs.abs();
        }
        let sgn = |i: usize| if flipped[i] { -1.0 } else { 1.0 };
        let nv = lp.num_vars();
        let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    by_var[j].push((i, a * sgn(i)));
                }
            }
        }
        for (j, col) in by_var.iter().enumerate() {
            let mut col = col.clone();
            col.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (i, a) in col {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += a,
                    _ => merged.push((i, a)),
                }
            }
            cols.push(merged.clone());
            if lp.free[j] {
                cols.push(merged.iter().map(|&(i, a)| (i, -a)).collect());
            }
        }
        let mut basis = vec![usize::MAX; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            let s = match c.cmp {
                Cmp::Le => 1.0,
                Cmp::Ge => -1.0,
                Cmp::Eq => continue,
            } * sgn(i);
            if s > 0.0 {
                basis[i] = cols.len();
            }
            cols.push(vec![(i, s)]);
        }
        let first_art = cols.len();
        for (i, bi) in basis.iter_mut().enumerate() {
            if *bi == usize::MAX {
                *bi = cols.len();
                cols.push(vec![(i, 1.0)]);
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let xb = b.clone();
        Simplex {
            m,
            cols,
            b,
            flipped,
            first_art,
            basis,
            binv,
            xb,
            iterations: 0,
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let ncols = self.cols.len();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &x| a.max(x));
        if self.first_art < ncols {
            let cost: Vec<f64> = (0..ncols)
                .map(|j| if j >= self.first_art { 1.0 } else { 0.0 })
                .collect();
            self.optimize(&cost, usize::MAX)?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&j, _)| j >= self.first_art)
                .map(|(_, &x)| x)
                .sum();
            if infeas > 1e-8 * scale {
                return Err(Error::LpInfeasible);
            }
            self.drive_out_artificials();
        }
        let mut cost = vec![0.0; ncols];
        let mut k = 0;
        for j in 0..lp.num_vars() {
            cost[k] = lp.objective[j];
            k += 1;
            if lp.free[j] {
                cost[k] = -lp.objective[j];
                k += 1;
            }
        }
        self.optimize(&cost, self.first_art)?;
        self.reinvert();
        // primal solution
        let mut xs = vec![0.0; ncols];
        for (i, &j) in self.basis.iter().enumerate() {
            xs[j] = self.xb[i].max(0.0);
        }
        let mut x = vec![0.0; lp.num_vars()];
        let mut k = 0;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = xs[k];
            k += 1;
            if lp.free[j] {
                *xj -= xs[k];
                k += 1;
            }
        }
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        let y = self.duals(&cost);
        let duals = y
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.flipped[i] { -v } else { v })
            .collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
            iterations: self.iterations,
        })
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, r) in y.iter_mut().zip(row) {
                    *yk += cb * r;
                }
            }
        }
        y
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut a = vec![0.0; m];
        for &(r, v) in &self.cols[j] {
            for (i, ai) in a.iter_mut().enumerate() {
                *ai += self.binv[i * m + r] * v;
            }
        }
        a
    }

    /// Runs simplex iterations with columns `>= limit` barred from entering.
    fn optimize(&mut self, cost: &[f64], limit: usize) -> Result<()> {
        let m = self.m;
        let ncols = self.cols.len();
        let mut in_basis = vec![false; ncols];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let cmax = 1.0 + cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let max_iter = 200 * (m + ncols) + 1000;
        let mut degenerate_run = 0usize;
        let mut since_reinvert = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 30;
            let y = self.duals(cost);
            let mut enter = None;
            let mut best = -COST_TOL * cmax;
            for j in 0..ncols.min(limit) {
                if in_basis[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>();
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else { return Ok(()) };
            let alpha = self.column(q);
            let amax = alpha.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let ptol = PIVOT_TOL * amax.max(1.0);
            let mut theta = f64::INFINITY;
            for i in 0..m {
                if alpha[i] > ptol {
                    theta = theta.min(self.xb[i].max(0.0) / alpha[i]);
                }
            }
            if !theta.is_finite() {
                return Err(Error::LpUnbounded);
            }
            let mut leave = usize::MAX;
            for i in 0..m {
                if alpha[i] > ptol
                    && self.xb[i].max(0.0) / alpha[i] <= theta + 1e-12 * (1.0 + theta)
                {
                    let better = if leave == usize::MAX {
                        true
                    } else if bland {
                        self.basis[i] < self.basis[leave]
                    } else {
                        alpha[i] > alpha[leave]
                    };
                    if better {
                        leave = i;
                    }
                }
            }
            let r = leave;
            degenerate_run = if theta <= 1e-13 {
                degenerate_run + 1
            } else {
                0
            };
            let pr = alpha[r];
            for k in 0..m {
                self.binv[r * m + k] /= pr;
            }
            for i in 0..m {
                if i != r && alpha[i] != 0.0 {
                    let f = alpha[i];
                    for k in 0..m {
                        let v = self.binv[r * m + k];
                        if v != 0.0 {
                            self.binv[i * m + k] -= f * v;
                        }
                    }
                }
            }
            for i in 0..m {
                if i != r {
                    self.xb[i] -= alpha[i] * theta;
                }
            }
            self.xb[r] = theta;
            in_basis[self.basis[r]] = false;
            in_basis[q] = true;
            self.basis[r] = q;
            self.iterations += 1;
            since_reinvert += 1;
            if since_reinvert >= REINVERT {
                self.reinvert();
                since_reinvert = 0;
            }
        }
        Err(Error::NotConverged {
            iterations: max_iter,
        })
    }

    fn reinvert(&mut self) {
        let m = self.m;
        if m == 0 {
            return;
        }
        let mut bm = nalgebra::DMatrix::<f64>::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                bm[(r, i)] = v;
            }
        }
        if let Some(inv) = bm.try_inverse() {
            for i in 0..m {
                for k in 0..m {
                    self.binv[i * m + k] = inv[(i, k)];
                }
            }
            for i in 0..m {
                self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
            }
        }
    }

    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.first_art {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let in_basis: std::collections::HashSet<usize> = self.basis.iter().copied().collect();
            let mut pick = None;
            let mut best = 1e-7;
            for j in 0..self.first_art {
                if in_basis.contains(&j) {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(i, a)| row[i] * a).sum();
                if v.abs() > best {
                    best = v.abs();
                    pick = Some(j);
                }
            }
            if let Some(q) = pick {
                let alpha = self.column(q);
                let pr = alpha[r];
                let theta = self.xb[r] / pr;
                for k in 0..m {
                    self.binv[r * m + k] /= pr;
                }
                for i in 0..m {
                    if i != r && alpha[i] != 0.0 {
                        let f = alpha[i];
                        for k in 0..m {
                            let v = self.binv[r * m + k];
                            self.binv[i * m + k] -= f * v;
                        }
                    }
                }
                for i in 0..m {
                    if i != r {
                        self.xb[i] -= alpha[i] * theta;
                    }
                }
                self.xb[r] = theta;
                self.basis[r] = q;
            }
        }
    }
}
