//! Multivariate polynomials with real coefficients.

use std::collections::BTreeMap;
use std::fmt;

/// A polynomial in `nvars` variables stored as a map from exponent vectors to coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

/// Target curvature, weights and offsets are all polynomial fields on the polytope.
pub type ScalarField = Polynomial;

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    /// c0 + <g, ξ>.
    pub fn affine(c0: f64, g: &[f64]) -> Self {
        let n = g.len();
        let mut p = Self::constant(n, c0);
        for (i, gi) in g.iter().enumerate() {
            p = p.add(&Self::var(n, i).scale(*gi));
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length mismatch");
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(e).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[u32]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn is_affine(&self) -> bool {
        self.degree() <= 1
    }

    /// Constant term and gradient of the affine part.
    pub fn affine_part(&self) -> (f64, Vec<f64>) {
        let c0 = self.coeff(&vec![0; self.nvars]);
        let g = (0..self.nvars)
            .map(|i| {
                let mut e = vec![0; self.nvars];
                e[i] = 1;
                self.coeff(&e)
            })
            .collect();
        (c0, g)
    }

    /// Re-embeds into more variables (new variables do not appear).
    pub fn with_nvars(&self, nvars: usize) -> Self {
        assert!(
            nvars >= self.nvars
                || self
                    .terms
                    .keys()
                    .all(|e| e[nvars..].iter().all(|&k| k == 0))
        );
        let mut p = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut f = vec![0; nvars];
            for (i, k) in e.iter().enumerate().take(nvars) {
                f[i] = *k;
            }
            p.add_term(f, *c);
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert!(x.len() >= self.nvars);
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, k) in x.iter().zip(e) {
                t *= xi.powi(*k as i32);
            }
            s += t;
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.nvars.max(other.nvars);
        let mut p = self.with_nvars(n);
        for (e, c) in &other.with_nvars(n).terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.nvars.max(other.nvars);
        let a = self.with_nvars(n);
        let b = other.with_nvars(n);
        let mut p = Self::zero(n);
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut p = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, c * e[i] as f64);
            }
        }
        p
    }

    /// Value, gradient and Hessian at `x`.
    pub fn jet(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.nvars;
        let mut v = 0.0;
        let mut g = vec![0.0; n];
        let mut h = vec![vec![0.0; n]; n];
        let pw = |xi: f64, k: i64| if k < 0 { 0.0 } else { xi.powi(k as i32) };
        for (e, c) in &self.terms {
            let mono = |skip: &[usize]| -> f64 {
                let mut t = *c;
                for (j, &k) in e.iter().enumerate() {
                    let d = skip.iter().filter(|&&s| s == j).count() as i64;
                    let mut f = 1.0;
                    for r in 0..d {
                        f *= (k as i64 - r) as f64;
                    }
                    t *= f * pw(x[j], k as i64 - d);
                }
                t
            };
            v += mono(&[]);
            for i in 0..n {
                if e[i] > 0 {
                    g[i] += mono(&[i]);
                }
                for j in i..n {
                    if (i == j && e[i] > 1) || (i != j && e[i] > 0 && e[j] > 0) {
                        let t = mono(&[i, j]);
                        h[i][j] += t;
                        if i != j {
                            h[j][i] += t;
                        }
                    }
                }
            }
        }
        (v, g, h)
    }

    /// Substitutes ξ_i = Σ_j m[i][j] y_j + b[i].
    pub fn compose_affine(&self, m: &[Vec<f64>], b: &[f64]) -> Self {
        let ny = m.first().map_or(0, |r| r.len());
        let lin: Vec<Polynomial> = (0..self.nvars)
            .map(|i| {
                let mut p = Self::constant(ny, b[i]);
                for (j, mij) in m[i].iter().enumerate() {
                    p = p.add(&Self::var(ny, j).scale(*mij));
                }
                p
            })
            .collect();
        let mut out = Self::zero(ny);
        for (e, c) in &self.terms {
            let mut t = Self::constant(ny, *c);
            for (i, k) in e.iter().enumerate() {
                t = t.mul(&lin[i].pow(*k));
            }
            out = out.add(&t);
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = ["x", "y", "z"];
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:?}")?;
            for (i, k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*{}", names.get(i).unwrap_or(&"w"))?,
                    _ => write!(f, "*{}^{}", names.get(i).unwrap_or(&"w"), k)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample() -> Polynomial {
        Polynomial::from_terms(
            2,
            [
                (vec![2, 1], 3.0),
                (vec![0, 3], -1.5),
                (vec![1, 0], 2.0),
                (vec![0, 0], 0.5),
            ],
        )
    }

    #[test]
    fn eval_and_degree() {
        let p = sample();
        assert_eq!(p.degree(), 3);
        assert_relative_eq!(p.eval(&[2.0, -1.0]), 3.0 * 4.0 * -1.0 + 1.5 + 4.0 + 0.5);
    }

    #[test]
    fn jet_matches_derivatives() {
        let p = sample();
        let x = [0.3, -0.7];
        let (v, g, h) = p.jet(&x);
        assert_relative_eq!(v, p.eval(&x), epsilon = 1e-14);
        for i in 0..2 {
            assert_relative_eq!(g[i], p.derivative(i).eval(&x), epsilon = 1e-14);
            for j in 0..2 {
                assert_relative_eq!(
                    h[i][j],
                    p.derivative(i).derivative(j).eval(&x),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn zero_terms_are_dropped() {
        let p = Polynomial::var(1, 0).sub(&Polynomial::var(1, 0));
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    proptest! {
        #[test]
        fn product_evaluates_pointwise(a in -2.0f64..2.0, b in -2.0f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let p = sample().scale(a).add(&Polynomial::constant(2, b));
            let q = Polynomial::affine(b, &[a, 1.0]);
            let lhs = p.mul(&q).eval(&[x, y]);
            let rhs = p.eval(&[x, y]) * q.eval(&[x, y]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn affine_substitution(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let p = sample();
            let m = vec![vec![1.0, 2.0], vec![-0.5, 0.25]];
            let b = vec![0.1, -0.3];
            let q = p.compose_affine(&m, &b);
            let xi = [x + 2.0 * y + 0.1, -0.5 * x + 0.25 * y - 0.3];
            prop_assert!((q.eval(&[x, y]) - p.eval(&xi)).abs() <= 1e-12 * (1.0 + p.eval(&xi).abs()));
        }
    }
}
