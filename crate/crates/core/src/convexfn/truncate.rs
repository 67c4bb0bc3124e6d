use std::sync::Arc;

use super::legendre::{normal_image_sublevel, RayRadii};
use super::{ConvexFunction, GridConvexFunction};
use crate::error::{Error, Result};
use crate::geometry::{norm, DelzantPolytope};
use crate::mesh::Mesh;

/// u_h: equal to u on W_h and extended linearly along each ray oq_e beyond q₁ = o + r_e e.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub h: f64,
    pub radii: RayRadii,
    /// W_h covers Δ̄ and u_h = u.
    pub full_coverage: bool,
    pub grid: GridConvexFunction,
    u: ConvexFunction,
    poly: DelzantPolytope,
}

impl Truncation {
    /// Ray radius of W_h in direction `e` (unit), interpolated in angle and clamped to R_e.
    pub fn radius_at(&self, e: &[f64]) -> f64 {
        let n = self.poly.dim();
        let (big_r, _, _) = self.poly.ray_exit(e);
        let r = if n == 1 {
            if e[0] >= 0.0 {
                self.radii.r[0]
            } else {
                self.radii.r[1]
            }
        } else {
            let m = self.radii.r.len();
            let step = std::f64::consts::TAU / m as f64;
            let t = e[1].atan2(e[0]).rem_euclid(std::f64::consts::TAU) / step;
            let k = (t.floor() as usize) % m;
            let s = t - t.floor();
            // interpolate the relative radius r/R so full rays stay full
            let rel = |j: usize| self.radii.r[j] / self.radii.big_r[j];
            big_r * ((1.0 - s) * rel(k) + s * rel((k + 1) % m))
        };
        r.min(big_r)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let o = self.poly.center();
        let d: Vec<f64> = x.iter().zip(o).map(|(a, b)| a - b).collect();
        let rho = norm(&d);
        if self.full_coverage || rho <= 1e-15 {
            return self.u.value(x);
        }
        let e: Vec<f64> = d.iter().map(|v| v / rho).collect();
        let r = self.radius_at(&e);
        if rho <= r {
            return self.u.value(x);
        }
        let q1: Vec<f64> = o.iter().zip(&e).map(|(a, b)| a + r * b).collect();
        let uq = self.u.value(&q1);
        uq + ((rho - r) / r) * (uq + self.h)
    }

    pub fn original(&self) -> &ConvexFunction {
        &self.u
    }
}

/// Truncates u (normalized at o) at level h, with W_h resolved ray by ray and u_h
/// re-interpolated onto `mesh`.
pub fn truncate(
    u: &ConvexFunction,
    poly: &DelzantPolytope,
    h: f64,
    rays: usize,
    mesh: Arc<Mesh>,
) -> Result<Truncation> {
    if !(h > 0.0) {
        return Err(Error::validation("h", "must be positive"));
    }
    let o = poly.center().to_vec();
    let uo = u.value(&o);
    if uo.abs() > 1e-9 {
        return Err(Error::validation(
            "u",
            format!("must vanish at o (u(o) = {uo}); normalize first"),
        ));
    }
    let radii = normal_image_sublevel(u, poly, h, rays)?;
    if radii.r.iter().any(|&r| r <= 0.0) {
        return Err(Error::validation("h", "W_h reduces to o on some ray"));
    }
    let full_coverage = radii.full_coverage;
    let mut t = Truncation {
        h,
        radii,
        full_coverage,
        grid: GridConvexFunction {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.nodes().len()],
        },
        u: u.clone(),
        poly: poly.clone(),
    };
    let values = mesh.nodes().iter().map(|x| t.value(x)).collect();
    t.grid = GridConvexFunction { mesh, values };
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::super::{guillemin_potential, SmoothFunction};
    use super::*;
    use crate::geometry::standard::*;
    use crate::poly::Polynomial;
    use approx::assert_relative_eq;

    #[test]
    fn guillemin_interval_truncation() {
        let iv = interval(-1.0, 1.0);
        let v: ConvexFunction = guillemin_potential(&iv).into();
        let mesh = Arc::new(Mesh::fan_refined(&iv, 1.0 / 64.0).unwrap());
        let h = 2.0 * 1f64.cosh().ln();
        let t = truncate(&v, &iv, h, 2, mesh).unwrap();
        assert!(!t.full_coverage);
        assert_relative_eq!(t.radii.r[0], 1f64.tanh(), epsilon = 1e-12);
        // closed-form oracle: v(r) = (1+r)ln(1+r) + (1−r)ln(1−r)
        let r = 1f64.tanh();
        let vr = (1.0 + r) * (1.0 + r).ln() + (1.0 - r) * (1.0 - r).ln();
        let expect = vr + ((1.0 - r) / r) * (vr + h);
        assert_relative_eq!(t.value(&[1.0]), expect, epsilon = 1e-12);
        assert_relative_eq!(t.value(&[1.0]), 1.1324383390339456, epsilon = 1e-12);
        assert!(t.value(&[1.0]) < 2.0 * 2f64.ln());
        for x in t.grid.mesh().nodes() {
            assert!(t.value(x) <= v.value(x) + 1e-12);
        }
        assert!(t.grid.is_convex());
    }

    #[test]
    fn bounded_gradient_is_case_one() {
        let iv = interval(-1.0, 1.0);
        let q: ConvexFunction =
            SmoothFunction::polynomial(Polynomial::from_terms(1, [(vec![2], 0.5)])).into();
        let mesh = Arc::new(Mesh::fan_refined(&iv, 0.125).unwrap());
        let t = truncate(&q, &iv, 0.5, 2, mesh.clone()).unwrap();
        assert!(t.full_coverage);
        assert_eq!(t.value(&[1.0]), 0.5);
        let t = truncate(&q, &iv, 0.3, 2, mesh).unwrap();
        assert!(!t.full_coverage);
        assert_relative_eq!(t.radii.r[0], 0.6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn square_truncation_is_below_and_monotone() {
        let sq = square();
        let v: ConvexFunction = guillemin_potential(&sq).into();
        let mesh = Arc::new(Mesh::fan_refined(&sq, 0.25).unwrap());
        let a = truncate(&v, &sq, 1.0, 360, mesh.clone()).unwrap();
        let b = truncate(&v, &sq, 2.0, 360, mesh).unwrap();
        for x in a.grid.mesh().nodes() {
            assert!(a.value(x) <= b.value(x) + 1e-9);
            assert!(b.value(x) <= v.value(x) + 1e-9);
        }
    }
}
