//! Lawson-Hanson nonnegative least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves min ‖E x − f‖₂ subject to x ≥ 0.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    let n = e.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = 1.0 + e.iter().fold(0.0f64, |a, v| a.max(v.abs())) * (1.0 + f.amax());
    let tol = 1e-12 * scale * (e.nrows().max(n) as f64);
    let max_outer = 3 * n + 10;
    let et = e.transpose();
    let mut blocked = vec![false; n];
    for _ in 0..max_outer {
        let w = &et * (f - e * &x);
        let mut t = None;
        let mut best = tol;
        for j in 0..n {
            if !passive[j] && !blocked[j] && w[j] > best {
                best = w[j];
                t = Some(j);
            }
        }
        let Some(t) = t else { return Ok(x) };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > 3 * n + 10 {
                return Err(Error::NotConverged { iterations: inner });
            }
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_p = least_squares(e, &idx, f);
            if inner == 1 {
                let kt = idx.iter().position(|&j| j == t).unwrap();
                if z_p[kt] <= 0.0 {
                    // round-off made the entering column useless; skip it this round
                    passive[t] = false;
                    blocked[t] = true;
                    break;
                }
                blocked.iter_mut().for_each(|b| *b = false);
            }
            if idx.iter().zip(z_p.iter()).all(|(_, &z)| z > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    let d = x[j] - z_p[k];
                    if d > 0.0 {
                        alpha = alpha.min(x[j] / d);
                    } else {
                        alpha = alpha.min(0.0);
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_p[k] - x[j]);
            }
            // the blocking coordinate lands on zero up to round-off in its own scale
            let xmax = idx.iter().fold(0.0f64, |m, &j| m.max(x[j].abs()));
            for &j in &idx {
                if x[j] <= 1e-14 * xmax {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    Err(Error::NotConverged {
        iterations: max_outer,
    })
}

fn least_squares(e: &DMatrix<f64>, idx: &[usize], f: &DVector<f64>) -> DVector<f64> {
    if idx.is_empty() {
        return DVector::zeros(0);
    }
    let sub = DMatrix::from_fn(e.nrows(), idx.len(), |r, c| e[(r, idx[c])]);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.amax();
    svd.solve(f, 1e-13 * smax.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
