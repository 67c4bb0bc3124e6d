//! Second-order Taylor jets in at most two variables.

use std::ops::{Add, Mul, Neg, Sub};

use crate::poly::Polynomial;

/// Value, gradient and Hessian of a function at a point. Unused slots stay zero in 1-D.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet { v: c, ..Default::default() }
    }

    /// ⟨a, ξ⟩ − λ at x.
    pub fn affine(a: &[f64], lambda: f64, x: &[f64]) -> Self {
        let mut j = Jet::constant(a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - lambda);
        for (k, &ak) in a.iter().enumerate() {
            j.g[k] = ak;
        }
        j
    }

    pub fn of_polynomial(p: &Polynomial, x: &[f64]) -> Self {
        let (v, g, h) = p.jet(x);
        let mut j = Jet::constant(v);
        for i in 0..g.len() {
            j.g[i] = g[i];
            for k in 0..g.len() {
                j.h[i][k] = h[i][k];
            }
        }
        j
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            v: self.v * s,
            g: [self.g[0] * s, self.g[1] * s],
            h: [
                [self.h[0][0] * s, self.h[0][1] * s],
                [self.h[1][0] * s, self.h[1][1] * s],
            ],
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        let r2 = r * r;
        let mut out = Jet::constant(r);
        for i in 0..2 {
            out.g[i] = -self.g[i] * r2;
            for k in 0..2 {
                out.h[i][k] = -self.h[i][k] * r2 + 2.0 * self.g[i] * self.g[k] * r2 * r;
            }
        }
        out
    }

    pub fn div(self, o: Jet) -> Self {
        self * o.recip()
    }

    /// Σ_ij c_ij ∂_i∂_j of the jet.
    pub fn trace_hessian(&self) -> f64 {
        self.h[0][0] + self.h[0][1] + self.h[1][0] + self.h[1][1]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..2 {
            out.g[i] += o.g[i];
            for k in 0..2 {
                out.h[i][k] += o.h[i][k];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..2 {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for k in 0..2 {
                out.h[i][k] = self.h[i][k] * o.v
                    + self.g[i] * o.g[k]
                    + self.g[k] * o.g[i]
                    + self.v * o.h[i][k];
            }
        }
        out
    }
}
