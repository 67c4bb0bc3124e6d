//! Optimal destabilizers: minimizing L_A over mean-zero hinge-convex grid functions in the
//! unit L² ball, plus the uniqueness, boundedness and truncation checks built on it.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::convexfn::{normalize_at, truncate, ConvexFunction, GridConvexFunction};
use crate::error::{Error, Result};
use crate::functionals::{linear_functional, plain_norm};
use crate::geometry::{dot, DelzantPolytope};
use crate::mesh::Mesh;
use crate::nnls::nnls;
use crate::poly::ScalarField;
use crate::quadrature::{gauss_legendre, graded_rule};

#[derive(Clone, Debug)]
pub struct DestabilizerOptions {
    pub resolution: f64,
    pub seed: u64,
    /// Radius of the L² ball.
    pub radius: f64,
    pub max_iterations: usize,
    /// Relative objective change that stops the iteration.
    pub tolerance: f64,
}

impl DestabilizerOptions {
    pub fn new(resolution: f64, seed: u64) -> Self {
        DestabilizerOptions {
            resolution,
            seed,
            radius: 1.0,
            max_iterations: 100_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DestabilizerResult {
    pub u: GridConvexFunction,
    /// L_A(u*)/‖u*‖, re-evaluated by quadrature; 0 when no destabilizer was found.
    #[serde(rename = "W")]
    pub w: f64,
    /// Optimal value of the linear program over the ball.
    pub objective: f64,
    pub norm: f64,
    /// W* < 0 at this resolution.
    pub destabilizing: bool,
    pub iterations: usize,
    pub log: Vec<f64>,
    pub mean: f64,
    /// Most negative hinge jump of u* (≥ 0 up to round-off).
    pub hinge_residual: f64,
}

/// Mean-zero hinge cone with its Cholesky-reduced dual data.
struct Cone {
    mass: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// L⁻¹Hᵀ with M = LLᵀ.
    b: DMatrix<f64>,
    ones_mass: DVector<f64>,
    total: f64,
}

impl Cone {
    fn new(mesh: &Mesh) -> Result<Self> {
        let nn = mesh.nodes().len();
        let mass = mesh.mass_matrix();
        let chol = Cholesky::new(mass.clone())
            .ok_or_else(|| Error::MeshTooCoarse("singular mass matrix".into()))?;
        let hinges = mesh.hinges();
        let mut ht = DMatrix::zeros(nn, hinges.len());
        for (k, h) in hinges.iter().enumerate() {
            for &(j, c) in &h.coeffs {
                ht[(j, k)] += c;
            }
        }
        let b = chol
            .l()
            .solve_lower_triangular(&ht)
            .ok_or_else(|| Error::MeshTooCoarse("singular mass matrix".into()))?;
        let ones_mass = &mass * DVector::from_element(nn, 1.0);
        let total = ones_mass.sum();
        Ok(Cone { mass, chol, b, ones_mass, total })
    }

    fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.mass * y))
    }

    fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    fn remove_mean(&self, x: &mut DVector<f64>) {
        let m = self.ones_mass.dot(x) / self.total;
        x.add_scalar_mut(-m);
    }

    /// M-orthogonal projection of s·y onto {hinge jumps ≥ 0, ∫u = 0} ∩ ball(radius). The cone
    /// projection is positively homogeneous, so y is projected unscaled and s applied after.
    fn project(&self, y: &DVector<f64>, s: f64, radius: f64) -> Result<DVector<f64>> {
        let mut u = self.project_cone(y)?;
        // below this the projection is round-off from cancelling y against the cone
        if self.norm(&u) <= 1e-8 * self.norm(y) {
            u.fill(0.0);
        } else {
            // a second pass removes the round-off inherited from |y|
            u = self.project_cone(&u)?;
        }
        u *= s;
        let nu = self.norm(&u);
        if nu > radius {
            u *= radius / nu;
        }
        Ok(u)
    }

    fn project_cone(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = x.clone();
        self.remove_mean(&mut x);
        let l = self.chol.l();
        let rhs = -(l.transpose() * &x);
        let mu = nnls(&self.b, &rhs)?;
        let mut u = x + l
            .transpose()
            .solve_upper_triangular(&(&self.b * mu))
            .expect("triangular factor is regular");
        self.remove_mean(&mut u);
        Ok(u)
    }
}

pub fn optimal_destabilizer(
    poly: &DelzantPolytope,
    a: &ScalarField,
    resolution: f64,
    seed: u64,
) -> Result<DestabilizerResult> {
    optimal_destabilizer_with(poly, a, &DestabilizerOptions::new(resolution, seed))
}

/// Projected gradient in the L²(dμ) metric with an expanding step; each projection is an
/// exact cone projection solved through its nonnegative least-squares dual.
pub fn optimal_destabilizer_with(
    poly: &DelzantPolytope,
    a: &ScalarField,
    opts: &DestabilizerOptions,
) -> Result<DestabilizerResult> {
    let mesh = Arc::new(Mesh::fan_refined(poly, opts.resolution)?);
    let cone = Cone::new(&mesh)?;
    let nn = mesh.nodes().len();
    let order = a.degree() + 2;
    let bd = mesh.boundary_hat_integrals(|_| 1.0, order);
    let it = mesh.hat_integrals(|x| a.eval(x), order);
    let c = DVector::from_iterator(nn, bd.iter().zip(&it).map(|(b, i)| b - i));
    let g = cone.chol.solve(&c);
    let gnorm = cone.norm(&g);
    let radius = opts.radius;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let start = DVector::from_fn(nn, |_, _| rng.gen_range(-1.0..1.0));
    let mut u = cone.project(&start, 1.0, radius)?;
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::InfeasibleStart);
    }
    let mut f = c.dot(&u);
    let mut log = vec![f];
    let floor = 1e-12 * gnorm * radius;
    let mut step = radius / gnorm.max(1e-300);
    // larger steps only amplify projection round-off; the fixed point does not depend on it
    let max_step = 100.0 * step;
    let mut iterations = 0;
    let mut converged = gnorm == 0.0;
    while !converged {
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations });
        }
        iterations += 1;
        let trial = cone.project(&(&u / step - &g), step, radius)?;
        let ft = c.dot(&trial);
        if ft <= f {
            let change = f - ft;
            u = trial;
            f = ft;
            log.push(f);
            converged = change <= opts.tolerance * f.abs().max(floor);
            step = (step * 10.0).min(max_step);
        } else {
            // only round-off can raise a linear objective under projection
            step *= 0.5;
            if step * gnorm < 1e-14 * radius {
                converged = true;
            }
        }
    }

    let hinge_residual = mesh
        .hinge_jumps(u.as_slice())
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mean = cone.ones_mass.dot(&u);
    let grid = GridConvexFunction::new(mesh.clone(), u.as_slice().to_vec())?;
    let gu: ConvexFunction = grid.clone().into();
    let norm = plain_norm(poly, &gu)?.sqrt();
    let tol = 1e-9 * gnorm * radius;
    let destabilizing = f < -tol;
    let w = if destabilizing {
        linear_functional(poly, a, &gu, None)?.value / norm
    } else {
        0.0
    };
    Ok(DestabilizerResult {
        u: grid,
        w,
        objective: f,
        norm,
        destabilizing,
        iterations,
        log,
        mean,
        hinge_residual,
    })
}

/// Minimum pairwise L²(dμ) correlation of the minimizers found from each seed.
pub fn uniqueness_check(
    poly: &DelzantPolytope,
    a: &ScalarField,
    resolution: f64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.len() < 2 {
        return Err(Error::validation("seeds", "need at least two seeds"));
    }
    let mut us = Vec::new();
    for &s in seeds {
        let r = optimal_destabilizer(poly, a, resolution, s)?;
        if !r.destabilizing {
            return Err(Error::NoDestabilizer { value: r.objective });
        }
        us.push(DVector::from_column_slice(r.u.values()));
    }
    let mesh = Arc::new(Mesh::fan_refined(poly, resolution)?);
    let m = mesh.mass_matrix();
    let ip = |x: &DVector<f64>, y: &DVector<f64>| x.dot(&(&m * y));
    let mut worst = f64::INFINITY;
    for i in 0..us.len() {
        for j in i + 1..us.len() {
            let corr = ip(&us[i], &us[j]) / (ip(&us[i], &us[i]) * ip(&us[j], &us[j])).sqrt();
            worst = worst.min(corr);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundednessTrace {
    /// (resolution, max |u*| over nodes) with u* scaled to unit norm.
    pub levels: Vec<(f64, f64)>,
    /// Last value ≤ 1.1 × median of the trace.
    pub bounded: bool,
}

pub fn boundedness_trace(
    poly: &DelzantPolytope,
    a: &ScalarField,
    resolutions: &[f64],
    seed: u64,
) -> Result<BoundednessTrace> {
    let mut levels = Vec::new();
    for &h in resolutions {
        let r = optimal_destabilizer(poly, a, h, seed)?;
        if !r.destabilizing {
            return Ok(BoundednessTrace { levels: Vec::new(), bounded: true });
        }
        let m = r.u.values().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        levels.push((h, m / r.norm));
    }
    let mut sorted: Vec<f64> = levels.iter().map(|l| l.1).collect();
    sorted.sort_by(f64::total_cmp);
    let bounded = match (levels.last(), sorted.len()) {
        (Some(last), k) => {
            let median = if k % 2 == 1 {
                sorted[k / 2]
            } else {
                0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
            };
            last.1 <= 1.1 * median
        }
        (None, _) => true,
    };
    Ok(BoundednessTrace { levels, bounded })
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationImprovement {
    pub h: f64,
    /// L_A(u) for u normalized at o.
    pub before: f64,
    pub after: f64,
    pub difference: f64,
    /// max_e (R_e − r_e).
    pub max_gap: f64,
    /// c_o / (2 max|A| max|n_F|).
    pub threshold: f64,
    pub threshold_met: bool,
}

/// Rays used to resolve W_h in 2-D.
pub const TRUNCATION_RAYS: usize = 64;

/// L_A(u) and L_A(u_h); u − u_h is integrated ray by ray beyond the radius of W_h.
pub fn truncation_improvement(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
    h: f64,
) -> Result<TruncationImprovement> {
    let n = poly.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let o = poly.center().to_vec();
    let un = normalize_at(u, &o);
    let mesh = Arc::new(Mesh::fan_refined(poly, 1.0)?);
    let t = truncate(&un, poly, h, TRUNCATION_RAYS, mesh)?;
    if t.full_coverage {
        return Err(Error::Case1);
    }
    let max_gap = t
        .radii
        .r
        .iter()
        .zip(&t.radii.big_r)
        .fold(0.0f64, |m, (r, big)| m.max(big - r));
    let max_a = poly
        .sample_points(16)
        .iter()
        .fold(0.0f64, |m, x| m.max(a.eval(x).abs()));
    let max_n = (0..poly.facets().len()).fold(0.0f64, |m, i| m.max(poly.facet_norm(i)));
    let c_o = poly.boundary_distance(&o) / poly.diameter();
    let threshold = c_o / (2.0 * max_a * max_n);

    let diff = |x: &[f64]| un.value(x) - t.value(x);
    let radial = graded_rule(8, 24, false, true);
    // ∫_{∂Δ} D dσ − ∫_Δ A D dμ along one ray, per unit of angle
    let along = |e: &[f64]| -> f64 {
        let (big_r, q, facet) = poly.ray_exit(e);
        let r = t.radius_at(e);
        let bnd = if n == 1 {
            diff(&q) / poly.facet_norm(facet)
        } else {
            diff(&q) * big_r / dot(e, &poly.normal(facet)).abs()
        };
        let mut int = 0.0;
        for &(s, w) in &radial {
            let rho = r + (big_r - r) * s;
            let x: Vec<f64> = o.iter().zip(e).map(|(c, d)| c + rho * d).collect();
            int += w * (big_r - r) * a.eval(&x) * diff(&x) * rho.powi(n as i32 - 1);
        }
        bnd - int
    };
    let difference = if n == 1 {
        along(&[1.0]) + along(&[-1.0])
    } else {
        let tau = std::f64::consts::TAU;
        let mut breaks: Vec<f64> = (0..t.radii.r.len())
            .map(|k| k as f64 * tau / t.radii.r.len() as f64)
            .collect();
        for v in poly.vertices() {
            breaks.push((v.point[1] - o[1]).atan2(v.point[0] - o[0]).rem_euclid(tau));
        }
        breaks.push(tau);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        let gl = gauss_legendre(12);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            for &(s, ws) in &gl {
                let th = w[0] + (w[1] - w[0]) * s;
                total += ws * (w[1] - w[0]) * along(&[th.cos(), th.sin()]);
            }
        }
        total
    };
    let before = linear_functional(poly, a, &un, None)?.value;
    Ok(TruncationImprovement {
        h,
        before,
        after: before - difference,
        difference,
        max_gap,
        threshold,
        threshold_met: max_gap <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexfn::{guillemin_potential, PlConvexFunction, SmoothFunction};
    use crate::expr::parse_polynomial;
    use crate::geometry::standard::*;
    use crate::stability::stability_margin;
    use approx::assert_relative_eq;

    fn p1(s: &str) -> ScalarField {
        parse_polynomial(s, 1).unwrap()
    }

    #[test]
    fn tilted_interval_is_destabilized() {
        let iv = interval(-1.0, 1.0);
        let r = optimal_destabilizer(&iv, &p1("1+6x"), 1.0 / 16.0, 1).unwrap();
        assert!(r.destabilizing);
        assert_relative_eq!(r.w, -2.0 * 6f64.sqrt(), epsilon = 1e-6);
        // u* ∝ ξ
        for (x, v) in r.u.mesh().nodes().iter().zip(r.u.values()) {
            assert_relative_eq!(*v, x[0] * r.norm / (2.0f64 / 3.0).sqrt(), epsilon = 1e-6);
        }
        assert!(r.mean.abs() <= 1e-9);
        assert!(r.hinge_residual >= -1e-9);
        assert!(r.log.windows(2).all(|w| w[1] <= w[0]));
        assert_relative_eq!(r.objective, r.w * r.norm, epsilon = 1e-8);
    }

    #[test]
    fn constant_density_is_stable() {
        let iv = interval(-1.0, 1.0);
        for h in [0.25, 1.0 / 16.0] {
            let r = optimal_destabilizer(&iv, &p1("1"), h, 3).unwrap();
            assert!(!r.destabilizing);
            assert_eq!(r.w, 0.0);
            assert!(r.objective >= -1e-9);
        }
    }

    #[test]
    fn kappa_eight_beats_abs() {
        let iv = interval(-1.0, 1.0);
        let r = optimal_destabilizer(&iv, &p1("1+4*(3x^2-1)"), 1.0 / 32.0, 0).unwrap();
        assert!(r.destabilizing);
        assert!(r.w <= -6f64.sqrt() + 1e-8, "{}", r.w);
    }

    #[test]
    fn ball_radius_scaling() {
        let iv = interval(-1.0, 1.0);
        let a = p1("1+4*(3x^2-1)+x");
        let mut o1 = DestabilizerOptions::new(1.0 / 16.0, 5);
        let r1 = optimal_destabilizer_with(&iv, &a, &o1).unwrap();
        o1.radius = 2.0;
        let r2 = optimal_destabilizer_with(&iv, &a, &o1).unwrap();
        assert!((r1.w - r2.w).abs() < 1e-8);
        for (x, y) in r1.u.values().iter().zip(r2.u.values()) {
            // u* converges like the square root of the objective tolerance
            assert_relative_eq!(2.0 * x, *y, epsilon = 1e-5);
        }
    }

    #[test]
    fn seeds_agree() {
        let iv = interval(-1.0, 1.0);
        let a = p1("1+6x");
        assert!(uniqueness_check(&iv, &a, 1.0 / 64.0, &[1, 2]).unwrap() >= 0.99);
        assert_eq!(uniqueness_check(&iv, &a, 1.0 / 16.0, &[4, 4]).unwrap(), 1.0);
        assert!(matches!(
            uniqueness_check(&iv, &p1("1"), 1.0 / 16.0, &[1, 2]),
            Err(Error::NoDestabilizer { .. })
        ));
    }

    #[test]
    fn bounded_traces() {
        let iv = interval(-1.0, 1.0);
        let res = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let t = boundedness_trace(&iv, &p1("1+6x"), &res, 0).unwrap();
        assert_eq!(t.levels.len(), 3);
        assert!(t.bounded);
        let same = boundedness_trace(&iv, &p1("1+6x+0*x^2"), &res, 0).unwrap();
        assert_eq!(t.levels, same.levels);
        let stable = boundedness_trace(&iv, &p1("1"), &res, 0).unwrap();
        assert!(stable.levels.is_empty());
    }

    #[test]
    fn sign_matches_lp_margin() {
        let iv = interval(-1.0, 1.0);
        for (a, bad) in [("1", false), ("1+6x", true), ("1+4*(3x^2-1)", true), ("1+(3x^2-1)", false)] {
            let w = optimal_destabilizer(&iv, &p1(a), 1.0 / 32.0, 0).unwrap();
            let m = stability_margin(&iv, &p1(a), None, 1.0 / 32.0).unwrap();
            assert_eq!(w.destabilizing, bad, "{a}");
            assert_eq!(m.margin < 0.0, bad, "{a}");
        }
    }

    #[test]
    fn square_runs_feasible() {
        let sq = square();
        let a = parse_polynomial("2+3x+y", 2).unwrap();
        let r = optimal_destabilizer(&sq, &a, 0.5, 0).unwrap();
        assert!(r.destabilizing);
        assert!(r.hinge_residual >= -1e-9);
        assert!(r.mean.abs() <= 1e-9);
        assert!(r.u.is_convex());
    }

    /// ∫_r^1 [v(ξ) − v(r) − v'(r)(ξ − r)] dξ with v = (1+ξ)ln(1+ξ) + (1−ξ)ln(1−ξ).
    fn interval_gap(r: f64) -> f64 {
        let prim = |x: f64| {
            let p = 1.0 + x;
            let m = 1.0 - x;
            let a = 0.5 * p * p * p.ln() - 0.25 * p * p;
            let b = if m > 0.0 { 0.5 * m * m * m.ln() - 0.25 * m * m } else { 0.0 };
            a - b
        };
        let v = |x: f64| (1.0 + x) * (1.0 + x).ln() + if x < 1.0 { (1.0 - x) * (1.0 - x).ln() } else { 0.0 };
        let dv = ((1.0 + r) / (1.0 - r)).ln();
        prim(1.0) - prim(r) - v(r) * (1.0 - r) - dv * (1.0 - r) * (1.0 - r) / 2.0
    }

    #[test]
    fn guillemin_interval_improves() {
        let iv = interval(-1.0, 1.0);
        let v: ConvexFunction = guillemin_potential(&iv).into();
        let out = truncation_improvement(&iv, &p1("1"), &v, 6.0).unwrap();
        let r = (1.0 - (-6f64).exp()).sqrt();
        assert_relative_eq!(out.max_gap, 1.0 - r, epsilon = 1e-10);
        assert!(out.threshold_met);
        assert_relative_eq!(out.threshold, 0.25, epsilon = 1e-12);
        let v1 = 2.0 * 2f64.ln();
        let vr = (1.0 + r) * (1.0 + r).ln() + (1.0 - r) * (1.0 - r).ln();
        let vh1 = vr + ((1.0 + r) / (1.0 - r)).ln() * (1.0 - r);
        let expect = 2.0 * ((v1 - vh1) - interval_gap(r));
        assert_relative_eq!(out.difference, expect, epsilon = 1e-10);
        assert!(out.difference > 0.0);
        for h in [4.0, 6.0, 9.0] {
            let o = truncation_improvement(&iv, &p1("1"), &v, h).unwrap();
            assert!(o.threshold_met && o.difference > 0.0);
        }
    }

    #[test]
    fn guillemin_square_improves() {
        let sq = square();
        let a = parse_polynomial("2", 2).unwrap();
        let v: ConvexFunction = guillemin_potential(&sq).into();
        let h = 6.0;
        let out = truncation_improvement(&sq, &a, &v, h).unwrap();
        assert!(out.threshold_met);
        assert!(out.difference > 0.0);
        // tensor Gauss oracle on panels graded toward the edges, where u − u_h lives
        let mesh = Arc::new(Mesh::fan_refined(&sq, 1.0).unwrap());
        let t = truncate(&v, &sq, h, TRUNCATION_RAYS, mesh).unwrap();
        let d = |x: &[f64]| v.value(x) - t.value(x);
        let rule: Vec<(f64, f64)> = graded_rule(8, 40, true, true)
            .into_iter()
            .map(|(s, w)| (2.0 * s - 1.0, 2.0 * w))
            .collect();
        let mut interior = 0.0;
        let mut boundary = 0.0;
        for &(x, wx) in &rule {
            for (p, q) in [(x, 1.0), (x, -1.0), (1.0, x), (-1.0, x)] {
                boundary += wx * d(&[p, q]);
            }
            for &(y, wy) in &rule {
                interior += wx * wy * d(&[x, y]);
            }
        }
        let oracle = boundary - 2.0 * interior;
        assert_relative_eq!(out.difference, oracle, max_relative = 2e-3);
    }

    #[test]
    fn bounded_gradient_is_case_one() {
        let iv = interval(-1.0, 1.0);
        let u: ConvexFunction = SmoothFunction::polynomial(p1("x^2")).into();
        assert_eq!(truncation_improvement(&iv, &p1("1"), &u, 6.0).unwrap_err(), Error::Case1);
        let pl: ConvexFunction = PlConvexFunction::from_pairs(&[(vec![1.0], 0.0), (vec![-1.0], 0.0)])
            .unwrap()
            .into();
        assert_eq!(truncation_improvement(&iv, &p1("1"), &pl, 6.0).unwrap_err(), Error::Case1);
    }
}
