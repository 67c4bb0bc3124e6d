//! The Abreu operator 𝒮(u) = −Σ ∂_i∂_j u^{ij}, its 𝔻-weighted form, and solvers for 𝒮(u) = A.
//!
//! Potentials are u = v + φ with v the Guillemin potential. The inverse Hessian is formed from
//! H̃ = P ∇²u with P = Π l_i, which is polynomial in ξ for polynomial φ, so u^{ij} stays finite
//! up to the facets:
//! u^{ij} = adj(H̃)_{ij} / Q with Q = det H̃ / P^{n−1}.

mod grid;
mod jet;
mod solve1d;
mod solve2d;

use std::sync::Arc;

use serde::Serialize;

pub use grid::AbreuGrid;
pub use jet::Jet;
pub use solve1d::{solve_1d, InfeasibleCertificate, Solve1d, Solution1d};
pub use solve2d::{guillemin_target, solve_2d, Solve2d, Solve2dOptions, StepLog};

use crate::convexfn::{GuilleminData, SmoothFunction};
use crate::error::{Error, Result};
use crate::geometry::{check_positive_weight, DelzantPolytope};
use crate::poly::{Polynomial, ScalarField};

/// φ in u = v + φ.
#[derive(Clone, Debug)]
pub enum Correction {
    Polynomial(Polynomial),
    Grid { grid: Arc<AbreuGrid>, values: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct SymplecticPotential {
    poly: DelzantPolytope,
    data: GuilleminData,
    phi: Correction,
    /// ∂_a∂_b φ for the polynomial correction.
    phi_hess: Vec<Vec<Polynomial>>,
}

impl SymplecticPotential {
    pub fn guillemin(poly: &DelzantPolytope) -> Self {
        Self::with_polynomial(poly, Polynomial::zero(poly.dim()))
    }

    pub fn with_polynomial(poly: &DelzantPolytope, phi: Polynomial) -> Self {
        let n = poly.dim();
        let phi = phi.with_nvars(n);
        let phi_hess = (0..n)
            .map(|a| (0..n).map(|b| phi.derivative(a).derivative(b)).collect())
            .collect();
        SymplecticPotential {
            poly: poly.clone(),
            data: GuilleminData::of(poly),
            phi: Correction::Polynomial(phi),
            phi_hess,
        }
    }

    pub fn with_grid(poly: &DelzantPolytope, grid: Arc<AbreuGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "phi",
                format!("{} values for {} grid nodes", values.len(), grid.len()),
            ));
        }
        Ok(SymplecticPotential {
            poly: poly.clone(),
            data: GuilleminData::of(poly),
            phi: Correction::Grid { grid, values },
            phi_hess: Vec::new(),
        })
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        &self.poly
    }

    pub fn correction(&self) -> &Correction {
        &self.phi
    }

    /// Adds an affine function to φ.
    pub fn add_affine(&self, c: f64, g: &[f64]) -> Self {
        let n = self.poly.dim();
        match &self.phi {
            Correction::Polynomial(p) => {
                let mut ell = Polynomial::constant(n, c);
                for (k, &gk) in g.iter().enumerate() {
                    ell = ell.add(&Polynomial::var(n, k).scale(gk));
                }
                Self::with_polynomial(&self.poly, p.add(&ell))
            }
            Correction::Grid { grid, values } => {
                let values = grid
                    .nodes()
                    .iter()
                    .zip(values)
                    .map(|(x, v)| v + c + x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                SymplecticPotential {
                    phi: Correction::Grid { grid: grid.clone(), values },
                    ..self.clone()
                }
            }
        }
    }

    /// u = v + φ as a convex function (polynomial corrections only).
    pub fn to_smooth(&self) -> Result<SmoothFunction> {
        match &self.phi {
            Correction::Polynomial(p) => Ok(SmoothFunction::guillemin_plus(&self.poly, p.clone())),
            Correction::Grid { .. } => Err(Error::validation(
                "u",
                "grid corrections have no closed-form evaluation",
            )),
        }
    }

    fn phi_hessian_jets(&self, x: &[f64]) -> [[Jet; 2]; 2] {
        let n = self.poly.dim();
        let mut out = [[Jet::default(); 2]; 2];
        for a in 0..n {
            for b in 0..n {
                out[a][b] = Jet::of_polynomial(&self.phi_hess[a][b], x);
            }
        }
        out
    }
}

/// P-scaled inverse Hessian data at one point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PointJets {
    /// u^{ij}
    pub uinv: [[Jet; 2]; 2],
    /// P = Π l_i
    pub p: Jet,
    /// det H̃ / P^{n−1}
    pub q: Jet,
    /// adj(H̃)
    pub adj: [[Jet; 2]; 2],
}

pub(crate) fn point_jets(data: &GuilleminData, n: usize, x: &[f64], phi: &[[Jet; 2]; 2]) -> PointJets {
    let ls: Vec<Jet> = data
        .normals
        .iter()
        .zip(&data.lambdas)
        .map(|(a, &lam)| Jet::affine(a, lam, x))
        .collect();
    let d = ls.len();
    let product_except = |skip: &[usize]| -> Jet {
        let mut p = Jet::constant(1.0);
        for (j, l) in ls.iter().enumerate() {
            if !skip.contains(&j) {
                p = p * *l;
            }
        }
        p
    };
    let p = product_except(&[]);
    let pi: Vec<Jet> = (0..d).map(|i| product_except(&[i])).collect();
    let mut ht = [[Jet::default(); 2]; 2];
    for a in 0..n {
        for b in 0..n {
            let mut s = p * phi[a][b];
            for i in 0..d {
                let c = data.normals[i][a] * data.normals[i][b];
                if c != 0.0 {
                    s = s + pi[i].scale(c);
                }
            }
            ht[a][b] = s;
        }
    }
    let mut uinv = [[Jet::default(); 2]; 2];
    let mut adj = [[Jet::default(); 2]; 2];
    let q;
    if n == 1 {
        q = ht[0][0];
        adj[0][0] = Jet::constant(1.0);
        uinv[0][0] = p.div(q);
    } else {
        let mut qq = p * (phi[0][0] * phi[1][1] - phi[0][1] * phi[1][0]);
        for i in 0..d {
            let ai = &data.normals[i];
            let perp = [-ai[1], ai[0]];
            let quad = phi[0][0].scale(perp[0] * perp[0])
                + phi[0][1].scale(perp[0] * perp[1])
                + phi[1][0].scale(perp[1] * perp[0])
                + phi[1][1].scale(perp[1] * perp[1]);
            qq = qq + pi[i] * quad;
            for k in i + 1..d {
                let ak = &data.normals[k];
                let br = ai[0] * ak[1] - ai[1] * ak[0];
                if br != 0.0 {
                    qq = qq + product_except(&[i, k]).scale(br * br);
                }
            }
        }
        q = qq;
        adj = [[ht[1][1], -ht[0][1]], [-ht[1][0], ht[0][0]]];
        let rq = q.recip();
        for a in 0..2 {
            for b in 0..2 {
                uinv[a][b] = adj[a][b] * rq;
            }
        }
    }
    PointJets { uinv, p, q, adj }
}

fn check_convex(pj: &PointJets, n: usize, x: &[f64]) -> Result<()> {
    let ok = pj.q.v > 0.0 && (pj.p.v <= 0.0 || (0..n).all(|i| pj.uinv[i][i].v > 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::NotStrictlyConvex { at: x.to_vec(), t: None })
    }
}

/// −(1/𝔻) Σ ∂_i∂_j(𝔻 u^{ij}) from jets.
pub(crate) fn divergence_form(pj: &PointJets, n: usize, dj: &Jet) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (*dj * pj.uinv[i][j]).h[i][j];
        }
    }
    -s / dj.v
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorResidual {
    pub spacing: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    /// 𝒮(u) (or 𝒮_𝔻(u)) at each node.
    pub values: Vec<f64>,
    pub target: Vec<f64>,
    /// values − target.
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// (h₁⋯h_n Σ r²)^{1/2}.
    pub l2_residual: f64,
    /// w = 1/det ∇²u (0 on ∂Δ).
    pub w: Vec<f64>,
    /// det ∇²u, absent on ∂Δ where it is infinite.
    pub det_hessian: Vec<Option<f64>>,
}

impl OperatorResidual {
    fn new(grid: &AbreuGrid, values: Vec<f64>, a: &ScalarField, w: Vec<f64>, det: Vec<Option<f64>>) -> Self {
        let target: Vec<f64> = grid.nodes().iter().map(|x| a.eval(x)).collect();
        let residual: Vec<f64> = values.iter().zip(&target).map(|(s, t)| s - t).collect();
        let max_residual = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let cell: f64 = grid.spacing().iter().product();
        let l2_residual = (cell * residual.iter().map(|r| r * r).sum::<f64>()).sqrt();
        OperatorResidual {
            spacing: grid.spacing().to_vec(),
            nodes: grid.nodes().to_vec(),
            values,
            target,
            residual,
            max_residual,
            l2_residual,
            w,
            det_hessian: det,
        }
    }

    /// Largest |residual| over nodes at distance > `collar` from ∂Δ.
    pub fn max_residual_outside(&self, poly: &DelzantPolytope, collar: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.residual)
            .filter(|(x, _)| poly.boundary_distance(x) > collar)
            .fold(0.0f64, |m, (_, r)| m.max(r.abs()))
    }
}

/// 𝒮(u) − A on the grid nodes.
pub fn abreu_operator(u: &SymplecticPotential, grid: &AbreuGrid, a: &ScalarField) -> Result<OperatorResidual> {
    let one = Polynomial::constant(u.poly.dim(), 1.0);
    weighted(u, grid, a, &one)
}

/// 𝒮_𝔻(u) − A with 𝒮_𝔻(u) = −(1/𝔻) Σ ∂_i∂_j(𝔻 u^{ij}).
pub fn generalized_abreu_operator(
    u: &SymplecticPotential,
    grid: &AbreuGrid,
    a: &ScalarField,
    d: &ScalarField,
) -> Result<OperatorResidual> {
    check_positive_weight(&u.poly, d)?;
    weighted(u, grid, a, d)
}

fn weighted(u: &SymplecticPotential, grid: &AbreuGrid, a: &ScalarField, d: &ScalarField) -> Result<OperatorResidual> {
    let n = u.poly.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    grid.check_collar(&u.poly)?;
    match &u.phi {
        Correction::Polynomial(_) => {
            let mut values = Vec::with_capacity(grid.len());
            let mut w = Vec::with_capacity(grid.len());
            let mut det = Vec::with_capacity(grid.len());
            for x in grid.nodes() {
                let pj = point_jets(&u.data, n, x, &u.phi_hessian_jets(x));
                check_convex(&pj, n, x)?;
                let dj = Jet::of_polynomial(d, x);
                values.push(divergence_form(&pj, n, &dj));
                w.push(pj.p.v / pj.q.v);
                det.push((pj.p.v > 0.0).then(|| pj.q.v / pj.p.v));
            }
            Ok(OperatorResidual::new(grid, values, a, w, det))
        }
        Correction::Grid { grid: g, values: phi } => {
            grid.same_nodes(g)?;
            let pjs = grid_point_values(u, grid, phi)?;
            let dv: Vec<f64> = grid.nodes().iter().map(|x| d.eval(x)).collect();
            let field = |i: usize, j: usize| -> Vec<f64> {
                pjs.iter().zip(&dv).map(|(pj, dd)| dd * pj.uinv[i][j].v).collect()
            };
            let mut total = vec![0.0; grid.len()];
            for i in 0..n {
                for j in 0..n {
                    let t = field(i, j);
                    let dij = if i == j {
                        grid.d2_field(&t, i)?
                    } else {
                        grid.d1_field(&grid.d1_field(&t, j)?, i)?
                    };
                    for (s, v) in total.iter_mut().zip(dij) {
                        *s += v;
                    }
                }
            }
            let values = total.iter().zip(&dv).map(|(s, dd)| -s / dd).collect();
            let w = pjs.iter().map(|pj| pj.p.v / pj.q.v).collect();
            let det = pjs.iter().map(|pj| (pj.p.v > 0.0).then(|| pj.q.v / pj.p.v)).collect();
            Ok(OperatorResidual::new(grid, values, a, w, det))
        }
    }
}

/// Inverse-Hessian data at every node with ∇²φ from finite differences.
fn grid_point_values(u: &SymplecticPotential, grid: &AbreuGrid, phi: &[f64]) -> Result<Vec<PointJets>> {
    let n = u.poly.dim();
    let mut hess = vec![vec![vec![0.0; grid.len()]; n]; n];
    for a in 0..n {
        hess[a][a] = grid.d2_field(phi, a)?;
        for b in a + 1..n {
            let m = grid.d1_field(&grid.d1_field(phi, b)?, a)?;
            hess[a][b] = m.clone();
            hess[b][a] = m;
        }
    }
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut ph = [[Jet::default(); 2]; 2];
            for a in 0..n {
                for b in 0..n {
                    ph[a][b] = Jet::constant(hess[a][b][k]);
                }
            }
            let pj = point_jets(&u.data, n, x, &ph);
            check_convex(&pj, n, x)?;
            Ok(pj)
        })
        .collect()
}

/// The cofactor form −Σ U^{ij} w_{ij}, w = 1/det ∇²u, at nodes off ∂Δ (None on ∂Δ in 2-D,
/// where U^{ij} is infinite).
pub fn cofactor_abreu_operator(u: &SymplecticPotential, grid: &AbreuGrid) -> Result<Vec<Option<f64>>> {
    let n = u.poly.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    grid.check_collar(&u.poly)?;
    let cof = |adj: &[[Jet; 2]; 2], p: f64, i: usize, j: usize| -> Option<f64> {
        if n == 1 {
            Some(1.0)
        } else if p > 0.0 {
            Some(adj[i][j].v / p)
        } else {
            None
        }
    };
    match &u.phi {
        Correction::Polynomial(_) => grid
            .nodes()
            .iter()
            .map(|x| {
                let pj = point_jets(&u.data, n, x, &u.phi_hessian_jets(x));
                check_convex(&pj, n, x)?;
                let w = pj.p.div(pj.q);
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        match cof(&pj.adj, pj.p.v, i, j) {
                            Some(c) => s += c * w.h[i][j],
                            None => return Ok(None),
                        }
                    }
                }
                Ok(Some(-s))
            })
            .collect(),
        Correction::Grid { grid: g, values: phi } => {
            grid.same_nodes(g)?;
            let pjs = grid_point_values(u, grid, phi)?;
            let w: Vec<f64> = pjs.iter().map(|pj| pj.p.v / pj.q.v).collect();
            let mut second = vec![vec![Vec::new(); n]; n];
            for i in 0..n {
                second[i][i] = grid.d2_field(&w, i)?;
                for j in i + 1..n {
                    let m = grid.d1_field(&grid.d1_field(&w, j)?, i)?;
                    second[i][j] = m.clone();
                    second[j][i] = m;
                }
            }
            Ok((0..grid.len())
                .map(|k| {
                    let pj = &pjs[k];
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            s += cof(&pj.adj, pj.p.v, i, j)? * second[i][j][k];
                        }
                    }
                    Some(-s)
                })
                .collect())
        }
    }
}

/// Directional derivative of 𝒮_𝔻 at u in the polynomial direction δφ, at each node.
pub fn linearized_operator(
    u: &SymplecticPotential,
    grid: &AbreuGrid,
    d: &ScalarField,
    dphi: &Polynomial,
) -> Result<Vec<f64>> {
    let n = u.poly.dim();
    if !matches!(u.phi, Correction::Polynomial(_)) {
        return Err(Error::validation("u", "linearization needs a polynomial correction"));
    }
    let dh: Vec<Vec<Polynomial>> = (0..n)
        .map(|a| (0..n).map(|b| dphi.with_nvars(n).derivative(a).derivative(b)).collect())
        .collect();
    grid.nodes()
        .iter()
        .map(|x| {
            let pj = point_jets(&u.data, n, x, &u.phi_hessian_jets(x));
            check_convex(&pj, n, x)?;
            let mut dj = [[Jet::default(); 2]; 2];
            for a in 0..n {
                for b in 0..n {
                    dj[a][b] = Jet::of_polynomial(&dh[a][b], x);
                }
            }
            Ok(linearized_at(&pj, n, &Jet::of_polynomial(d, x), &dj))
        })
        .collect()
}

/// δ𝒮_𝔻 = −(1/𝔻) Σ ∂_i∂_j(𝔻 δu^{ij}) with δu^{ij} = −u^{ia} δH_{ab} u^{bj}.
pub(crate) fn linearized_at(pj: &PointJets, n: usize, dj: &Jet, dh: &[[Jet; 2]; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut du = Jet::default();
            for a in 0..n {
                for b in 0..n {
                    du = du - pj.uinv[i][a] * dh[a][b] * pj.uinv[b][j];
                }
            }
            s += (*dj * du).h[i][j];
        }
    }
    -s / dj.v
}
