//! 𝒮(u) = A on an interval, solved in closed form through w = 1/u″.

use std::sync::Arc;

use serde::Serialize;

use super::{AbreuGrid, SymplecticPotential};
use crate::error::{Error, Result};
use crate::geometry::DelzantPolytope;
use crate::poly::{Polynomial, ScalarField};
use crate::quadrature::gauss_legendre;

/// Samples used to bracket the zeros and the minimum of w.
const SCAN: usize = 4096;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum Solve1d {
    Solved(Solution1d),
    Infeasible(InfeasibleCertificate),
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution1d {
    pub alpha: f64,
    pub beta: f64,
    /// Coefficients of w = 1/u″ in ascending powers of ξ.
    pub w: Vec<f64>,
    /// w / ((ξ−α)(β−ξ)), positive on [α, β].
    pub q: Vec<f64>,
    /// (1 − (β−α) q) / ((ξ−α)(β−ξ)), so that φ″ = r/q.
    pub r: Vec<f64>,
    pub min_q: f64,
    /// Balance residuals of ∫A dμ and ∫Aξ dμ.
    pub balance: [f64; 2],
    #[serde(skip)]
    poly: Option<DelzantPolytope>,
}

/// w ≤ 0 somewhere inside: the zero set of w marks where every solution breaks down.
#[derive(Clone, Debug, Serialize)]
pub struct InfeasibleCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub w: Vec<f64>,
    /// Interior zeros of w.
    pub zero_set: Vec<f64>,
    pub min_w: f64,
    pub argmin: f64,
}

fn coeffs(p: &Polynomial) -> Vec<f64> {
    (0..=p.degree()).map(|k| p.coeff(&[k as u32])).collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |s, v| s * x + v)
}

fn antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
    out
}

/// Quotient of c by (ξ − r); the remainder is dropped.
fn deflate(c: &[f64], r: f64) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    let mut out = vec![0.0; c.len() - 1];
    let mut carry = 0.0;
    for k in (1..c.len()).rev() {
        carry = c[k] + carry * r;
        out[k - 1] = carry;
    }
    out
}

/// Quotient of c by (ξ−α)(β−ξ).
fn divide_bubble(c: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let q = deflate(&deflate(c, alpha), beta);
    q.iter().map(|v| -v).collect()
}

fn to_polynomial(c: &[f64]) -> Polynomial {
    Polynomial::from_terms(1, c.iter().enumerate().map(|(k, v)| (vec![k as u32], *v)))
}

/// Minimum of c on [a, b]: a dense scan refined by golden-section search.
fn minimum(c: &[f64], a: f64, b: f64) -> (f64, f64) {
    let h = (b - a) / SCAN as f64;
    let k = (0..=SCAN)
        .min_by(|&i, &j| horner(c, a + i as f64 * h).total_cmp(&horner(c, a + j as f64 * h)))
        .unwrap();
    let (mut lo, mut hi) = ((a + (k as f64 - 1.0) * h).max(a), (a + (k as f64 + 1.0) * h).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if horner(c, x1) <= horner(c, x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let x = 0.5 * (lo + hi);
    let (xm, vm) = [a + k as f64 * h, x]
        .into_iter()
        .map(|x| (x, horner(c, x)))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    (xm, vm)
}

/// Sign changes of c on the open interval, located by bisection.
fn zeros(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let h = (b - a) / SCAN as f64;
    let mut out = Vec::new();
    for i in 1..SCAN - 1 {
        let (mut lo, mut hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (flo, fhi) = (horner(c, lo), horner(c, hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo * fhi >= 0.0 {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if horner(c, m) * flo > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// Integrates w″ = −A with w(α) = w(β) = 0. The balance conditions ∫A dμ = Vol(∂Δ, dσ) and
/// ∫Aξ dμ = ∫_∂Δ ξ dσ are checked first; they are equivalent to w′(α) = 1, w′(β) = −1.
pub fn solve_1d(poly: &DelzantPolytope, a: &ScalarField) -> Result<Solve1d> {
    if poly.dim() != 1 {
        return Err(Error::UnsupportedDimension(poly.dim()));
    }
    let (lo, hi) = poly.bounding_box();
    let (alpha, beta) = (lo[0], hi[0]);
    let ca = coeffs(&a.with_nvars(1));
    let i1 = antiderivative(&ca);
    let mass = horner(&i1, beta) - horner(&i1, alpha);
    let caxi: Vec<f64> = std::iter::once(0.0).chain(ca.iter().copied()).collect();
    let i2 = antiderivative(&caxi);
    let moment = horner(&i2, beta) - horner(&i2, alpha);
    // primitive normals ±1, so dσ puts unit mass at each endpoint
    let balance = [mass - 2.0, moment - (alpha + beta)];
    let scale = 1.0 + alpha.abs().max(beta.abs());
    let residual = balance[0].abs().max(balance[1].abs());
    if residual > 1e-10 * scale {
        return Err(Error::Unbalanced { residual });
    }

    // w = −∫∫A + c₀ + c₁ξ
    let mut w: Vec<f64> = antiderivative(&antiderivative(&ca)).iter().map(|v| -v).collect();
    let (wa, wb) = (horner(&w, alpha), horner(&w, beta));
    let c1 = -(wb - wa) / (beta - alpha);
    let c0 = -wa - c1 * alpha;
    w[0] += c0;
    w[1] += c1;
    let q = divide_bubble(&w, alpha, beta);
    let (argmin, min_q) = minimum(&q, alpha, beta);
    if min_q > 0.0 {
        let mut num: Vec<f64> = q.iter().map(|v| -(beta - alpha) * v).collect();
        num[0] += 1.0;
        let r = divide_bubble(&num, alpha, beta);
        return Ok(Solve1d::Solved(Solution1d {
            alpha,
            beta,
            w,
            q,
            r,
            min_q,
            balance,
            poly: Some(poly.clone()),
        }));
    }
    let (argmin, min_w) = {
        let (x, v) = minimum(&w, alpha, beta);
        if v < 0.0 { (x, v) } else { (argmin, horner(&w, argmin)) }
    };
    Ok(Solve1d::Infeasible(InfeasibleCertificate {
        alpha,
        beta,
        zero_set: zeros(&w, alpha, beta),
        w,
        min_w,
        argmin,
    }))
}

impl Solution1d {
    pub fn w(&self, x: f64) -> f64 {
        horner(&self.w, x)
    }

    pub fn w_polynomial(&self) -> Polynomial {
        to_polynomial(&self.w)
    }

    /// u″ = 1/w.
    pub fn u_second(&self, x: f64) -> f64 {
        1.0 / self.w(x)
    }

    /// φ″ = u″ − v″, smooth on [α, β].
    pub fn phi_second(&self, x: f64) -> f64 {
        horner(&self.r, x) / horner(&self.q, x)
    }

    /// φ with u = v + φ normalized by u(o) = 0, u′(o) = 0.
    pub fn phi(&self, x: f64) -> f64 {
        let poly = self.poly.as_ref().expect("solution carries its polytope");
        let o = poly.center()[0];
        let (a, b) = (self.alpha, self.beta);
        let v = |t: f64| (t - a) * (t - a).ln() + (b - t) * (b - t).ln();
        let dv = (o - a).ln() - (b - o).ln();
        // ∫_o^x (x − t) φ″(t) dt
        let gl = gauss_legendre(24);
        let panels = 8;
        let mut s = 0.0;
        for p in 0..panels {
            let t0 = o + (x - o) * p as f64 / panels as f64;
            let t1 = o + (x - o) * (p + 1) as f64 / panels as f64;
            for &(z, wt) in &gl {
                let t = t0 + (t1 - t0) * z;
                s += wt * (t1 - t0) * (x - t) * self.phi_second(t);
            }
        }
        s - v(o) - dv * (x - o)
    }

    /// u = v + φ with φ sampled on the nodes of `grid`.
    pub fn potential(&self, grid: Arc<AbreuGrid>) -> Result<SymplecticPotential> {
        let poly = self.poly.as_ref().expect("solution carries its polytope");
        let values = grid.nodes().iter().map(|x| self.phi(x[0])).collect();
        SymplecticPotential::with_grid(poly, grid, values)
    }
}
