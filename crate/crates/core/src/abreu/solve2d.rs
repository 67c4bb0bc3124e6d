//! Continuity method for 𝒮(u) = A on a polygon: A_t = tA + (1−t)A₀ from the Guillemin
//! potential, with damped Gauss–Newton on a polynomial correction at each step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_convex, divergence_form, linearized_at, point_jets, AbreuGrid, Jet, SymplecticPotential};
use crate::convexfn::GuilleminData;
use crate::error::{Error, Result};
use crate::geometry::DelzantPolytope;
use crate::poly::{Polynomial, ScalarField};

const DAMPING_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Clone, Debug, Serialize)]
pub struct Solve2dOptions {
    /// Grid cells per axis for the collocation nodes.
    pub cells: usize,
    pub path_steps: usize,
    /// Total degree of the correction φ.
    pub degree: usize,
    pub max_newton: usize,
    /// Halvings of a failed path step before giving up.
    pub max_refinements: usize,
}

impl Default for Solve2dOptions {
    fn default() -> Self {
        Solve2dOptions { cells: 64, path_steps: 8, degree: 10, max_newton: 40, max_refinements: 6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepLog {
    pub t: f64,
    pub accepted: bool,
    pub newton_iterations: usize,
    /// max |𝒮(u) − A_t| after each Newton iteration.
    pub residuals: Vec<f64>,
    pub smallest_damping: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Solve2d {
    /// Last t reached; 1 on success.
    pub t: f64,
    pub converged: bool,
    /// First t that failed.
    pub t_star: Option<f64>,
    #[serde(skip)]
    pub failure: Option<Error>,
    pub failure_message: Option<String>,
    pub max_residual: f64,
    pub a0: String,
    pub phi: String,
    pub history: Vec<StepLog>,
    #[serde(skip)]
    pub phi_polynomial: Polynomial,
    #[serde(skip)]
    pub potential: SymplecticPotential,
    /// Accepted (t, φ_t) along the path.
    #[serde(skip)]
    pub path: Vec<(f64, Polynomial)>,
}

impl Solve2d {
    pub fn into_result(self) -> Result<Self> {
        match self.failure.clone() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// ξ ↦ (ξ − m)/r per axis over the bounding box.
fn scaled_coordinates(poly: &DelzantPolytope) -> Vec<Polynomial> {
    let (lo, hi) = poly.bounding_box();
    let n = poly.dim();
    (0..n)
        .map(|k| {
            let m = 0.5 * (lo[k] + hi[k]);
            let r = 0.5 * (hi[k] - lo[k]);
            let mut g = vec![0.0; n];
            g[k] = 1.0 / r;
            Polynomial::affine(-m / r, &g)
        })
        .collect()
}

fn legendre(s: &Polynomial, degree: usize) -> Vec<Polynomial> {
    let n = s.nvars();
    let mut out = vec![Polynomial::constant(n, 1.0), s.clone()];
    for k in 1..degree {
        let next = s
            .mul(&out[k])
            .scale((2 * k + 1) as f64)
            .sub(&out[k - 1].scale(k as f64))
            .scale(1.0 / (k + 1) as f64);
        out.push(next);
    }
    out.truncate(degree + 1);
    out
}

/// Tensor Legendre products of total degree 2..=degree.
fn basis(poly: &DelzantPolytope, degree: usize) -> Vec<Polynomial> {
    let s = scaled_coordinates(poly);
    let px = legendre(&s[0], degree);
    let py = legendre(&s[1], degree);
    let mut out = Vec::new();
    for total in 2..=degree {
        for i in 0..=total {
            out.push(px[i].mul(&py[total - i]));
        }
    }
    out
}

/// Monomials in scaled coordinates of total degree ≤ degree.
fn monomials(poly: &DelzantPolytope, degree: usize) -> Vec<Polynomial> {
    let s = scaled_coordinates(poly);
    let n = poly.dim();
    let mut out = Vec::new();
    for total in 0..=degree {
        if n == 1 {
            out.push(s[0].pow(total as u32));
        } else {
            for i in 0..=total {
                out.push(s[0].pow(i as u32).mul(&s[1].pow((total - i) as u32)));
            }
        }
    }
    out
}

/// A₀: the L²(dμ) projection of 𝒮(v) onto polynomials of degree ≤ 4.
pub fn guillemin_target(poly: &DelzantPolytope) -> Result<ScalarField> {
    let n = poly.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let data = GuilleminData::of(poly);
    let zero = [[Jet::default(); 2]; 2];
    let one = Jet::constant(1.0);
    let rule = poly.measures(16);
    let mono = monomials(poly, 4);
    let m = mono.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for nd in &rule.interior {
        let s = divergence_form(&point_jets(&data, n, &nd.x, &zero), n, &one);
        let vals: Vec<f64> = mono.iter().map(|p| p.eval(&nd.x)).collect();
        for i in 0..m {
            rhs[i] += nd.w * s * vals[i];
            for j in 0..m {
                gram[(i, j)] += nd.w * vals[i] * vals[j];
            }
        }
    }
    let c = gram
        .cholesky()
        .ok_or(Error::DegenerateMomentMatrix)?
        .solve(&rhs);
    let mut out = Polynomial::zero(n);
    for (p, ci) in mono.iter().zip(c.iter()) {
        out = out.add(&p.scale(*ci));
    }
    Ok(out)
}

/// max over ℓ ∈ {1, ξ_k} of |∫_∂Δ ℓ dσ − ∫ Aℓ dμ|.
fn balance_residual(poly: &DelzantPolytope, a: &ScalarField) -> f64 {
    let n = poly.dim();
    let rule = poly.measures(a.degree() + 2);
    (0..=n)
        .map(|k| {
            let ell = |x: &[f64]| if k == 0 { 1.0 } else { x[k - 1] };
            let bd: f64 = rule.boundary().map(|(_, nd)| nd.w * ell(&nd.x)).sum();
            let int: f64 = rule.interior.iter().map(|nd| nd.w * a.eval(&nd.x) * ell(&nd.x)).sum();
            (bd - int).abs()
        })
        .fold(0.0, f64::max)
}

/// ∇²B_k jets at every node, stored [node][k].
struct BasisJets {
    jets: Vec<Vec<[[Jet; 2]; 2]>>,
}

impl BasisJets {
    fn new(basis: &[Polynomial], grid: &AbreuGrid) -> Self {
        let hess: Vec<[[Polynomial; 2]; 2]> = basis
            .iter()
            .map(|b| {
                let d0 = b.derivative(0);
                let d1 = b.derivative(1);
                let xy = d0.derivative(1);
                [[d0.derivative(0), xy.clone()], [xy, d1.derivative(1)]]
            })
            .collect();
        let jets = grid
            .nodes()
            .par_iter()
            .map(|x| {
                hess.iter()
                    .map(|h| {
                        let j01 = Jet::of_polynomial(&h[0][1], x);
                        [
                            [Jet::of_polynomial(&h[0][0], x), j01],
                            [j01, Jet::of_polynomial(&h[1][1], x)],
                        ]
                    })
                    .collect()
            })
            .collect();
        BasisJets { jets }
    }

    fn combine(&self, node: usize, c: &[f64]) -> [[Jet; 2]; 2] {
        let mut out = [[Jet::default(); 2]; 2];
        for (h, &ck) in self.jets[node].iter().zip(c) {
            if ck != 0.0 {
                for a in 0..2 {
                    for b in 0..2 {
                        out[a][b] = out[a][b] + h[a][b].scale(ck);
                    }
                }
            }
        }
        out
    }
}

struct Problem<'a> {
    data: GuilleminData,
    grid: &'a AbreuGrid,
    bj: BasisJets,
}

impl Problem<'_> {
    /// 𝒮(v + Σc_kB_k) at every node.
    fn operator(&self, c: &[f64]) -> Result<Vec<f64>> {
        let one = Jet::constant(1.0);
        self.grid
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let pj = point_jets(&self.data, 2, x, &self.bj.combine(k, c));
                check_convex(&pj, 2, x)?;
                Ok(divergence_form(&pj, 2, &one))
            })
            .collect()
    }

    fn jacobian(&self, c: &[f64]) -> DMatrix<f64> {
        let one = Jet::constant(1.0);
        let m = c.len();
        let rows: Vec<Vec<f64>> = self
            .grid
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let pj = point_jets(&self.data, 2, x, &self.bj.combine(k, c));
                (0..m).map(|j| linearized_at(&pj, 2, &one, &self.bj.jets[k][j])).collect()
            })
            .collect();
        DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

enum StepOutcome {
    Converged(Vec<f64>),
    Failed(Error),
}

fn newton(
    pr: &Problem,
    target: &[f64],
    t: f64,
    start: &[f64],
    opts: &Solve2dOptions,
    log: &mut StepLog,
) -> StepOutcome {
    let tol = 1e-6 * (1.0 + max_abs(target));
    let mut c = start.to_vec();
    let residual_at = |c: &[f64]| -> Result<Vec<f64>> {
        Ok(pr.operator(c)?.iter().zip(target).map(|(s, a)| s - a).collect())
    };
    let mut r = match residual_at(&c) {
        Ok(r) => r,
        Err(Error::NotStrictlyConvex { at, .. }) => {
            return StepOutcome::Failed(Error::NotStrictlyConvex { at, t: Some(t) })
        }
        Err(e) => return StepOutcome::Failed(e),
    };
    log.residuals.push(max_abs(&r));
    loop {
        if max_abs(&r) <= tol {
            return StepOutcome::Converged(c);
        }
        if log.newton_iterations >= opts.max_newton {
            return StepOutcome::Failed(Error::NewtonStalled { t, residual: max_abs(&r) });
        }
        log.newton_iterations += 1;
        let j = pr.jacobian(&c);
        // column equilibration before the normal equations
        let scale: Vec<f64> = (0..j.ncols())
            .map(|k| {
                let s = j.column(k).norm();
                if s > 0.0 { 1.0 / s } else { 1.0 }
            })
            .collect();
        let js = DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| j[(i, k)] * scale[k]);
        let rv = DVector::from_column_slice(&r);
        let normal = js.transpose() * &js;
        let rhs = -(js.transpose() * rv);
        let Some(dy) = normal.lu().solve(&rhs) else {
            return StepOutcome::Failed(Error::NewtonStalled { t, residual: max_abs(&r) });
        };
        let delta: Vec<f64> = dy.iter().zip(&scale).map(|(d, s)| d * s).collect();
        let f0 = sum_sq(&r);
        let mut lambda = 1.0;
        let mut last_convexity: Option<Error> = None;
        loop {
            let trial: Vec<f64> = c.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            match residual_at(&trial) {
                Ok(rt) if sum_sq(&rt) < f0 => {
                    c = trial;
                    r = rt;
                    break;
                }
                Ok(_) => {}
                Err(Error::NotStrictlyConvex { at, .. }) => {
                    last_convexity = Some(Error::NotStrictlyConvex { at, t: Some(t) });
                }
                Err(e) => return StepOutcome::Failed(e),
            }
            lambda *= 0.5;
            log.smallest_damping = log.smallest_damping.min(lambda);
            if lambda < DAMPING_FLOOR {
                // a full step that leaves the convex cone everywhere points at the boundary of 𝐒
                return StepOutcome::Failed(match last_convexity {
                    Some(e) if lambda * 2.0 >= 1.0 => e,
                    _ => Error::NewtonStalled { t, residual: max_abs(&r) },
                });
            }
        }
        log.residuals.push(max_abs(&r));
    }
}

fn to_polynomial(basis: &[Polynomial], c: &[f64]) -> Polynomial {
    let mut out = Polynomial::zero(2);
    for (b, ck) in basis.iter().zip(c) {
        out = out.add(&b.scale(*ck));
    }
    out
}

/// Solves 𝒮(u) = A by continuation from the Guillemin potential. Failure along the path is
/// reported in the result (`failure`, `t_star`) together with the residual history.
pub fn solve_2d(poly: &DelzantPolytope, a: &ScalarField, opts: &Solve2dOptions) -> Result<Solve2d> {
    if poly.dim() != 2 {
        return Err(Error::UnsupportedDimension(poly.dim()));
    }
    let a = a.with_nvars(2);
    let residual = balance_residual(poly, &a);
    let scale = 1.0 + poly.boundary_measure();
    if residual > 1e-8 * scale {
        return Err(Error::Unbalanced { residual });
    }
    let grid = AbreuGrid::new(poly, opts.cells)?;
    grid.check_collar(poly)?;
    let a0 = guillemin_target(poly)?;
    let basis = basis(poly, opts.degree.max(2));
    let pr = Problem { data: GuilleminData::of(poly), bj: BasisJets::new(&basis, &grid), grid: &grid };
    let a_vals: Vec<f64> = grid.nodes().iter().map(|x| a.eval(x)).collect();
    let a0_vals: Vec<f64> = grid.nodes().iter().map(|x| a0.eval(x)).collect();
    let target_at = |t: f64| -> Vec<f64> {
        a_vals.iter().zip(&a0_vals).map(|(x, y)| t * x + (1.0 - t) * y).collect()
    };

    let mut c = vec![0.0; basis.len()];
    let mut t = 0.0;
    let mut history = Vec::new();
    let mut path = Vec::new();
    let mut failure = None;
    let mut t_star = None;
    let mut dt = 1.0 / opts.path_steps.max(1) as f64;
    let mut refinements = 0;
    // t = 0 first, so the reported residual at the start is A₀ against 𝒮(v)
    let mut next = 0.0;
    loop {
        let mut log = StepLog {
            t: next,
            accepted: false,
            newton_iterations: 0,
            residuals: Vec::new(),
            smallest_damping: 1.0,
        };
        let outcome = newton(&pr, &target_at(next), next, &c, opts, &mut log);
        match outcome {
            StepOutcome::Converged(cn) => {
                log.accepted = true;
                history.push(log);
                c = cn;
                t = next;
                path.push((t, to_polynomial(&basis, &c)));
                if t >= 1.0 {
                    break;
                }
                next = (t + dt).min(1.0);
            }
            StepOutcome::Failed(e) => {
                history.push(log);
                if refinements < opts.max_refinements && next > 0.0 {
                    refinements += 1;
                    dt *= 0.5;
                    next = t + dt;
                    continue;
                }
                t_star = Some(next);
                failure = Some(e);
                break;
            }
        }
    }
    let phi = to_polynomial(&basis, &c);
    let max_residual = history
        .iter()
        .rev()
        .find(|h| h.accepted)
        .and_then(|h| h.residuals.last().copied())
        .unwrap_or(f64::NAN);
    Ok(Solve2d {
        t,
        converged: failure.is_none(),
        t_star,
        failure_message: failure.as_ref().map(|e: &Error| e.to_string()),
        failure,
        max_residual,
        a0: a0.to_string(),
        phi: phi.to_string(),
        history,
        potential: SymplecticPotential::with_polynomial(poly, phi.clone()),
        phi_polynomial: phi,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abreu::{abreu_operator, solve_1d, Solve1d};
    use crate::expr::parse_polynomial;
    use crate::functionals::d1_distance;
    use crate::geometry::standard::*;
    use approx::assert_relative_eq;

    fn small(cells: usize) -> Solve2dOptions {
        Solve2dOptions { cells, ..Default::default() }
    }

    #[test]
    fn legendre_recurrence() {
        let s = Polynomial::var(1, 0);
        let p = legendre(&s, 4);
        // P₄ = (35x⁴ − 30x² + 3)/8
        assert_relative_eq!(p[4].eval(&[0.3]), (35.0 * 0.3f64.powi(4) - 30.0 * 0.09 + 3.0) / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn guillemin_targets() {
        let a0 = guillemin_target(&square()).unwrap();
        for x in [[0.0, 0.0], [0.9, -0.4], [1.0, 1.0]] {
            assert_relative_eq!(a0.eval(&x), 2.0, epsilon = 1e-10);
        }
        let a0 = guillemin_target(&simplex2()).unwrap();
        assert_relative_eq!(a0.eval(&[0.2, 0.3]), 6.0, epsilon = 1e-9);
        // a trapezoid is not constant-curvature; the projection must still reproduce ∫𝒮(v)
        let tz = crate::geometry::build_polytope(
            vec![
                crate::geometry::Facet { normal: vec![1, 0], lambda: 0.0 },
                crate::geometry::Facet { normal: vec![0, 1], lambda: 0.0 },
                crate::geometry::Facet { normal: vec![0, -1], lambda: -1.0 },
                crate::geometry::Facet { normal: vec![-1, -1], lambda: -3.0 },
            ],
            None,
        )
        .unwrap();
        let a0 = guillemin_target(&tz).unwrap();
        assert!(balance_residual(&tz, &a0) <= 1e-6, "{}", balance_residual(&tz, &a0));
    }

    #[test]
    fn square_constant_target_is_guillemin() {
        let sq = square();
        let s = solve_2d(&sq, &parse_polynomial("2", 2).unwrap(), &small(32)).unwrap();
        assert!(s.converged);
        assert_eq!(s.t, 1.0);
        assert!(s.max_residual <= 1e-8, "{}", s.max_residual);
        for x in [[0.0, 0.0], [0.5, -0.7], [1.0, 1.0]] {
            assert!(s.phi_polynomial.eval(&x).abs() <= 1e-6);
        }
    }

    #[test]
    fn small_balanced_perturbation() {
        let sq = square();
        let a = parse_polynomial("2+0.05*(3x^2-1)", 2).unwrap();
        let s = solve_2d(&sq, &a, &Solve2dOptions::default()).unwrap();
        assert!(s.converged, "{:?}", s.failure);
        let g = AbreuGrid::new(&sq, 64).unwrap();
        let r = abreu_operator(&s.potential, &g, &a).unwrap();
        assert!(r.max_residual <= 1e-4, "{}", r.max_residual);
        assert!(r.max_residual <= 1e-6 * (1.0 + 2.1), "{}", r.max_residual);
        // separable: u″ in ξ₁ is the 1-D solution for κ = 0.1
        let iv = interval(-1.0, 1.0);
        let Solve1d::Solved(one) = solve_1d(&iv, &parse_polynomial("1+0.05*(3x^2-1)", 1).unwrap()).unwrap() else {
            panic!("1-D problem is solvable")
        };
        let dxx = s.phi_polynomial.derivative(0).derivative(0);
        for x in [-0.8, -0.2, 0.3, 0.9] {
            assert_relative_eq!(dxx.eval(&[x, 0.1]), one.phi_second(x), epsilon = 1e-6);
        }
    }

    #[test]
    fn strongly_destabilized_target_stalls() {
        let sq = square();
        // the ξ₁ slice is the interval family with κ = 6, solvable only for t < 2/3
        let a = parse_polynomial("2+3*(3x^2-1)", 2).unwrap();
        let s = solve_2d(&sq, &a, &small(32)).unwrap();
        assert!(!s.converged);
        let t_star = s.t_star.unwrap();
        assert!(t_star < 1.0 && t_star <= 2.0 / 3.0 + 0.05, "{t_star}");
        assert!(matches!(s.failure, Some(Error::NewtonStalled { .. }) | Some(Error::NotStrictlyConvex { .. })));
        assert!(!s.history.is_empty());
        // beyond t* the 1-D slice target is destabilized
        let iv = interval(-1.0, 1.0);
        let k = 6.0 * (2.0 / 3.0 + 0.05);
        let slice = parse_polynomial(&format!("1+{k}*(3x^2-1)/2"), 1).unwrap();
        assert!(matches!(solve_1d(&iv, &slice).unwrap(), Solve1d::Infeasible(_)));
        let st = crate::stability::stability_margin(&iv, &slice, None, 1.0 / 64.0).unwrap();
        assert!(st.margin < 0.0);
    }

    #[test]
    fn unbalanced_and_dimension() {
        assert!(matches!(
            solve_2d(&square(), &parse_polynomial("2+x", 2).unwrap(), &small(16)),
            Err(Error::Unbalanced { .. })
        ));
        assert!(matches!(
            solve_2d(&interval(-1.0, 1.0), &parse_polynomial("1", 1).unwrap(), &small(16)),
            Err(Error::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn d1_continuity_along_path() {
        let sq = square();
        let a0 = parse_polynomial("2", 2).unwrap();
        let a1 = parse_polynomial("2+0.3*(3x^2-1)+0.2*(3y^2-1)", 2).unwrap();
        let at = |t: f64| a1.scale(t).add(&a0.scale(1.0 - t));
        let opts = small(24);
        let u = |t: f64| -> crate::convexfn::ConvexFunction {
            let s = solve_2d(&sq, &at(t), &opts).unwrap();
            assert!(s.converged);
            s.potential.to_smooth().unwrap().into()
        };
        let base = u(0.5);
        let d: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|dt| d1_distance(&sq, &base, &u(0.5 + dt)).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d[2] <= 0.5 * d[0], "{d:?}");
    }
}
