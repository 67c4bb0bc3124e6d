//! L_A and its weighted form, the Mabuchi functional, the filtration norm, W and the toric d₁ distance.

use serde::{Deserialize, Serialize};

use crate::cells::{self, Cell};
use crate::convexfn::{AffineCell, ConvexFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::geometry::{check_positive_weight, dot, DelzantPolytope};
use crate::poly::{Polynomial, ScalarField};
use crate::quadrature::{gauss_legendre, graded_rule, simplex_rule, simplex_volume};

/// Default quadrature order.
pub const DEFAULT_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub boundary: f64,
    pub interior: f64,
    pub value: f64,
    pub order: usize,
    pub error_estimate: f64,
}

/// A quadrature node carrying the value of u there.
#[derive(Clone, Debug)]
pub(crate) struct Sample {
    pub x: Vec<f64>,
    pub w: f64,
    pub u: f64,
}

fn smooth_degree(s: &SmoothFunction) -> usize {
    s.polynomial_part().degree()
}

/// Gauss points per direction for graded rules at a given order.
fn graded_params(order: usize) -> (usize, usize) {
    (order / 2 + 2, 2 * order + 10)
}

/// Nodes for ∫_Δ F(x, u(x)) dμ, exact when F is a polynomial of degree `deg` in x times u^`power`
/// and u is piecewise affine or polynomial.
pub(crate) fn interior_samples(
    poly: &DelzantPolytope,
    u: &ConvexFunction,
    deg: usize,
    power: usize,
    order: usize,
) -> Result<Vec<Sample>> {
    if let Some(cells) = u.affine_cells(poly) {
        let ord = order.max(deg + power);
        let mut out = Vec::new();
        for c in cells {
            for nd in simplex_rule(&c.simplex, ord) {
                let uv = c.c + dot(&c.g, &nd.x);
                out.push(Sample {
                    x: nd.x,
                    w: nd.w,
                    u: uv,
                });
            }
        }
        return Ok(out);
    }
    let ConvexFunction::Smooth(s) = u else {
        unreachable!()
    };
    if s.guillemin().is_none() {
        let ord = order.max(deg + power * smooth_degree(s));
        return Ok(poly
            .measures(ord)
            .interior
            .into_iter()
            .map(|nd| Sample {
                u: s.value(&nd.x),
                x: nd.x,
                w: nd.w,
            })
            .collect());
    }
    Ok(guillemin_interior_rule(poly, order)?
        .into_iter()
        .map(|(x, w)| Sample {
            u: s.value(&x),
            x,
            w,
        })
        .collect())
}

/// Fan rule graded toward the outer facet of each fan simplex and toward its corners.
pub(crate) fn guillemin_interior_rule(
    poly: &DelzantPolytope,
    order: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = poly.dim();
    let (q, levels) = graded_params(order);
    let radial = graded_rule(q, levels, false, true);
    let mut out = Vec::new();
    match n {
        1 => {
            for s in poly.fan() {
                let (o, p) = (&s.vertices[0], &s.vertices[1]);
                let len = (p[0] - o[0]).abs();
                for &(r, w) in &radial {
                    out.push((vec![o[0] + r * (p[0] - o[0])], w * len));
                }
            }
        }
        2 => {
            let along = graded_rule(q, levels, true, true);
            for s in poly.fan() {
                let (o, p1, p2) = (&s.vertices[0], &s.vertices[1], &s.vertices[2]);
                let det = ((p1[0] - o[0]) * (p2[1] - o[1]) - (p1[1] - o[1]) * (p2[0] - o[0])).abs();
                for &(r, wr) in &radial {
                    for &(t, wt) in &along {
                        let y = [(1.0 - t) * p1[0] + t * p2[0], (1.0 - t) * p1[1] + t * p2[1]];
                        out.push((
                            vec![o[0] + r * (y[0] - o[0]), o[1] + r * (y[1] - o[1])],
                            wr * wt * r * det,
                        ));
                    }
                }
            }
        }
        _ => return Err(Error::UnsupportedDimension(n)),
    }
    Ok(out)
}

/// Nodes for ∫_{∂Δ} F dσ, tagged with their facet.
pub(crate) fn boundary_samples(
    poly: &DelzantPolytope,
    u: &ConvexFunction,
    deg: usize,
    power: usize,
    order: usize,
) -> Result<Vec<(usize, Sample)>> {
    let n = poly.dim();
    let mut out = Vec::new();
    match u {
        ConvexFunction::Grid(g) => {
            let mesh = g.mesh();
            let ord = order.max(deg + power);
            for face in mesh.boundary() {
                let pts: Vec<Vec<f64>> = face
                    .nodes
                    .iter()
                    .map(|&i| mesh.nodes()[i].clone())
                    .collect();
                let vals: Vec<f64> = face.nodes.iter().map(|&i| g.values()[i]).collect();
                let inv = 1.0 / poly.facet_norm(face.facet);
                if pts.len() == 1 {
                    out.push((
                        face.facet,
                        Sample {
                            x: pts[0].clone(),
                            w: inv,
                            u: vals[0],
                        },
                    ));
                    continue;
                }
                let len = simplex_volume(&pts);
                for (t, w) in gauss_legendre((ord + 2).div_ceil(2)) {
                    let x: Vec<f64> = (0..n)
                        .map(|k| (1.0 - t) * pts[0][k] + t * pts[1][k])
                        .collect();
                    out.push((
                        face.facet,
                        Sample {
                            x,
                            w: w * len * inv,
                            u: (1.0 - t) * vals[0] + t * vals[1],
                        },
                    ));
                }
            }
        }
        ConvexFunction::Pl(pl) => {
            let ord = order.max(deg + power);
            for i in 0..poly.facets().len() {
                let inv = 1.0 / poly.facet_norm(i);
                for c in poly.facet_cells(i) {
                    if c.len() == 1 {
                        out.push((
                            i,
                            Sample {
                                x: c[0].clone(),
                                w: inv,
                                u: pl.value(&c[0]),
                            },
                        ));
                        continue;
                    }
                    if c.len() != 2 {
                        return Err(Error::UnsupportedDimension(n));
                    }
                    let (p, q) = (&c[0], &c[1]);
                    let mut ts = vec![0.0, 1.0];
                    let pcs = pl.pieces();
                    for j in 0..pcs.len() {
                        for k in j + 1..pcs.len() {
                            let (dp, dq) = (
                                pcs[j].eval(p) - pcs[k].eval(p),
                                pcs[j].eval(q) - pcs[k].eval(q),
                            );
                            if (dp > 0.0) != (dq > 0.0) && dp != dq {
                                let t = dp / (dp - dq);
                                if t > 0.0 && t < 1.0 {
                                    ts.push(t);
                                }
                            }
                        }
                    }
                    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
                    let len = simplex_volume(c);
                    let gl = gauss_legendre((ord + 2).div_ceil(2));
                    for w2 in ts.windows(2) {
                        let (a, b) = (w2[0], w2[1]);
                        for &(s, ws) in &gl {
                            let t = a + (b - a) * s;
                            let x: Vec<f64> = (0..n).map(|k| (1.0 - t) * p[k] + t * q[k]).collect();
                            out.push((
                                i,
                                Sample {
                                    u: pl.value(&x),
                                    x,
                                    w: ws * (b - a) * len * inv,
                                },
                            ));
                        }
                    }
                }
            }
        }
        ConvexFunction::Smooth(s) => {
            if s.guillemin().is_none() {
                let ord = order.max(deg + power * smooth_degree(s));
                for (i, nd) in poly.measures(ord).boundary() {
                    out.push((
                        i,
                        Sample {
                            x: nd.x.clone(),
                            w: nd.w,
                            u: s.value(&nd.x),
                        },
                    ));
                }
            } else {
                let (q, levels) = graded_params(order);
                let along = graded_rule(q, levels, true, true);
                for i in 0..poly.facets().len() {
                    let inv = 1.0 / poly.facet_norm(i);
                    for c in poly.facet_cells(i) {
                        match c.len() {
                            1 => out.push((
                                i,
                                Sample {
                                    x: c[0].clone(),
                                    w: inv,
                                    u: s.value(&c[0]),
                                },
                            )),
                            2 => {
                                let len = simplex_volume(c);
                                for &(t, w) in &along {
                                    let x: Vec<f64> =
                                        (0..n).map(|k| (1.0 - t) * c[0][k] + t * c[1][k]).collect();
                                    out.push((
                                        i,
                                        Sample {
                                            u: s.value(&x),
                                            x,
                                            w: w * len * inv,
                                        },
                                    ));
                                }
                            }
                            _ => return Err(Error::UnsupportedDimension(n)),
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn one(n: usize) -> ScalarField {
    Polynomial::constant(n, 1.0)
}

fn check_dims(poly: &DelzantPolytope, fields: &[&ScalarField], u: &ConvexFunction) -> Result<()> {
    let n = poly.dim();
    if u.dim() != n {
        return Err(Error::validation(
            "u",
            format!(
                "function of {} variables on a {n}-dimensional polytope",
                u.dim()
            ),
        ));
    }
    for f in fields {
        if f.nvars() > n && !f.terms().all(|(m, _)| m[n..].iter().all(|&e| e == 0)) {
            return Err(Error::validation(
                "A",
                "uses more variables than the polytope has",
            ));
        }
    }
    Ok(())
}

fn lin_parts(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
    d: &ScalarField,
    order: usize,
) -> Result<(f64, f64)> {
    let deg = a.degree() + d.degree();
    let bd: f64 = boundary_samples(poly, u, d.degree(), 1, order)?
        .iter()
        .map(|(_, s)| s.w * s.u * d.eval(&s.x))
        .sum();
    let it: f64 = interior_samples(poly, u, deg, 1, order)?
        .iter()
        .map(|s| s.w * a.eval(&s.x) * s.u * d.eval(&s.x))
        .sum();
    Ok((bd, it))
}

/// L_A(u) = ∫_{∂Δ} u 𝔻 dσ − ∫_Δ A u 𝔻 dμ (𝔻 ≡ 1 when absent).
pub fn linear_functional(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
    d: Option<&ScalarField>,
) -> Result<FunctionalReport> {
    linear_functional_with(poly, a, u, d, DEFAULT_ORDER)
}

pub fn linear_functional_with(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
    d: Option<&ScalarField>,
    order: usize,
) -> Result<FunctionalReport> {
    let unit = one(poly.dim());
    let d = match d {
        Some(d) => {
            check_positive_weight(poly, d)?;
            d
        }
        None => &unit,
    };
    check_dims(poly, &[a, d], u)?;
    let (b0, i0) = lin_parts(poly, a, u, d, order)?;
    let (b1, i1) = lin_parts(poly, a, u, d, order + 4)?;
    Ok(FunctionalReport {
        boundary: b1,
        interior: i1,
        value: b1 - i1,
        order: order + 4,
        error_estimate: ((b1 - i1) - (b0 - i0)).abs(),
    })
}

/// ∫_Δ log l_i dμ by the divergence theorem with a base point on facet i.
fn integral_log_l(poly: &DelzantPolytope, i: usize) -> f64 {
    let n = poly.dim() as f64;
    let b = poly.facet_cells(i)[0][0].clone();
    let mut acc = -poly.volume();
    for j in 0..poly.facets().len() {
        if j == i {
            continue;
        }
        let lb = poly.l(j, &b);
        if lb.abs() < 1e-300 {
            continue;
        }
        let mut on_facet = 0.0;
        for c in poly.facet_cells(j) {
            on_facet += match c.len() {
                1 => poly.l(i, &c[0]).ln(),
                _ => {
                    let (al, be) = (poly.l(i, &c[0]).max(0.0), poly.l(i, &c[1]).max(0.0));
                    let xl = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
                    let mean = if (al - be).abs() <= 1e-12 * (al + be) {
                        al.ln()
                    } else {
                        (xl(be) - xl(al)) / (be - al) - 1.0
                    };
                    mean * simplex_volume(c)
                }
            } / poly.facet_norm(j);
        }
        acc += lb * on_facet;
    }
    acc / n
}

/// −∫_Δ log det ∇²u dμ.
pub fn entropy_term(poly: &DelzantPolytope, u: &SmoothFunction, order: usize) -> Result<f64> {
    let n = poly.dim();
    let det = |h: &[Vec<f64>]| -> f64 {
        match n {
            1 => h[0][0],
            2 => h[0][0] * h[1][1] - h[0][1] * h[1][0],
            _ => nalgebra::DMatrix::from_fn(n, n, |i, j| h[i][j]).determinant(),
        }
    };
    let deg = 2 * (smooth_degree(u) + poly.facets().len()) + 2;
    let rule = poly.measures(order.max(deg));
    let mut acc = 0.0;
    if let Some(g) = u.guillemin() {
        // log det = log(P det) − Σ log l_i with P = Π l_i; P det is a polynomial on Δ̄
        for nd in &rule.interior {
            let (_, _, h) = u.jet(&nd.x);
            let ls = g.ls(&nd.x);
            let pd = det(&h) * ls.iter().product::<f64>();
            if !(pd > 0.0) {
                return Err(Error::NotStrictlyConvex {
                    at: nd.x.clone(),
                    t: None,
                });
            }
            acc += nd.w * pd.ln();
        }
        for i in 0..poly.facets().len() {
            acc -= integral_log_l(poly, i);
        }
    } else {
        for nd in &rule.interior {
            let dt = det(&u.hessian(&nd.x));
            if !(dt > 0.0) {
                return Err(Error::NotStrictlyConvex {
                    at: nd.x.clone(),
                    t: None,
                });
            }
            acc += nd.w * dt.ln();
        }
    }
    Ok(-acc)
}

/// F_A(u) = −∫ log det ∇²u dμ + L_A(u).
pub fn mabuchi_functional(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
) -> Result<f64> {
    let ConvexFunction::Smooth(s) = u else {
        return Err(Error::validation(
            "u",
            "the Mabuchi functional needs a smooth symbolic potential",
        ));
    };
    Ok(entropy_term(poly, s, DEFAULT_ORDER)? + linear_functional(poly, a, u, None)?.value)
}

/// (2π)ⁿ F_a(u).
pub fn mabuchi_scaling_report(
    poly: &DelzantPolytope,
    a: &ScalarField,
    u: &ConvexFunction,
) -> Result<f64> {
    Ok((2.0 * std::f64::consts::PI).powi(poly.dim() as i32) * mabuchi_functional(poly, a, u)?)
}

/// ∫ u φ_a dμ for φ = (1, ξ − o) and ∫ u² dμ.
fn moments(poly: &DelzantPolytope, u: &ConvexFunction, order: usize) -> Result<(Vec<f64>, f64)> {
    let n = poly.dim();
    let o = poly.center();
    let mut b = vec![0.0; n + 1];
    let mut uu = 0.0;
    for s in interior_samples(poly, u, 1, 2, order)? {
        b[0] += s.w * s.u;
        for k in 0..n {
            b[k + 1] += s.w * s.u * (s.x[k] - o[k]);
        }
        uu += s.w * s.u * s.u;
    }
    Ok((b, uu))
}

/// Gram matrix of (1, ξ − o) in L²(dμ).
pub(crate) fn affine_gram(poly: &DelzantPolytope) -> nalgebra::DMatrix<f64> {
    let n = poly.dim();
    let o = poly.center();
    let mut m = nalgebra::DMatrix::zeros(n + 1, n + 1);
    for nd in poly.measures(2).interior {
        let phi: Vec<f64> = std::iter::once(1.0)
            .chain((0..n).map(|k| nd.x[k] - o[k]))
            .collect();
        for i in 0..=n {
            for j in 0..=n {
                m[(i, j)] += nd.w * phi[i] * phi[j];
            }
        }
    }
    m
}

/// ‖χ_u‖² = min over affine ℓ of ∫(u + ℓ)² dμ − (∫(u + ℓ) dμ)²/Vol.
pub fn filtration_norm(poly: &DelzantPolytope, u: &ConvexFunction) -> Result<f64> {
    filtration_norm_with(poly, u, DEFAULT_ORDER)
}

pub fn filtration_norm_with(poly: &DelzantPolytope, u: &ConvexFunction, order: usize) -> Result<f64> {
    let n = poly.dim();
    let o = poly.center();
    let samples = interior_samples(poly, u, 1, 2, order)?;
    let mut b = nalgebra::DVector::zeros(n + 1);
    for s in &samples {
        b[0] += s.w * s.u;
        for k in 0..n {
            b[k + 1] += s.w * s.u * (s.x[k] - o[k]);
        }
    }
    let ch = affine_gram(poly).cholesky().ok_or(Error::DegenerateMomentMatrix)?;
    let c = ch.solve(&b);
    // second pass on the residual avoids cancellation for nearly affine u
    Ok(samples
        .iter()
        .map(|s| {
            let r = s.u - c[0] - (0..n).map(|k| c[k + 1] * (s.x[k] - o[k])).sum::<f64>();
            s.w * r * r
        })
        .sum())
}

/// ∫u² dμ − (∫u dμ)²/Vol: the variance without removing linear terms.
pub fn plain_norm(poly: &DelzantPolytope, u: &ConvexFunction) -> Result<f64> {
    let (b, uu) = moments(poly, u, DEFAULT_ORDER)?;
    Ok((uu - b[0] * b[0] / poly.volume()).max(0.0))
}

/// W(u) = L_A(u)/‖χ_u‖.
pub fn w_ratio(poly: &DelzantPolytope, a: &ScalarField, u: &ConvexFunction) -> Result<f64> {
    let nrm = filtration_norm(poly, u)?.sqrt();
    if nrm <= 1e-12 {
        return Err(Error::AffineInput { norm: nrm });
    }
    Ok(linear_functional(poly, a, u, None)?.value / nrm)
}

/// The affine Ā with ∫_Δ Ā ℓ 𝔻 dμ = ∫_{∂Δ} ℓ 𝔻 dσ for every affine ℓ.
pub fn extremal_affine(poly: &DelzantPolytope, d: Option<&ScalarField>) -> Result<ScalarField> {
    let n = poly.dim();
    let unit = one(n);
    let d = match d {
        Some(d) => {
            check_positive_weight(poly, d)?;
            d
        }
        None => &unit,
    };
    let rule = poly.measures(d.degree() + 2);
    let phi = |x: &[f64]| -> Vec<f64> { std::iter::once(1.0).chain(x.iter().cloned()).collect() };
    let mut m = nalgebra::DMatrix::zeros(n + 1, n + 1);
    let mut b = nalgebra::DVector::zeros(n + 1);
    for nd in &rule.interior {
        let p = phi(&nd.x);
        let w = nd.w * d.eval(&nd.x);
        for i in 0..=n {
            for j in 0..=n {
                m[(i, j)] += w * p[i] * p[j];
            }
        }
    }
    for (_, nd) in rule.boundary() {
        let p = phi(&nd.x);
        let w = nd.w * d.eval(&nd.x);
        for i in 0..=n {
            b[i] += w * p[i];
        }
    }
    let c = m.lu().solve(&b).ok_or(Error::DegenerateMomentMatrix)?;
    let g: Vec<f64> = (1..=n).map(|k| c[k]).collect();
    Ok(Polynomial::affine(c[0], &g))
}

fn affine_integral(cell: &Cell, c: f64, g: &[f64]) -> f64 {
    cells::simplices(cell)
        .iter()
        .map(|s| {
            let k = s.len() as f64;
            let centroid: Vec<f64> = (0..g.len())
                .map(|d| s.iter().map(|p| p[d]).sum::<f64>() / k)
                .collect();
            simplex_volume(s) * (c + dot(g, &centroid))
        })
        .sum()
}

fn bbox(s: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = s[0].len();
    let lo = (0..n)
        .map(|k| s.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi = (0..n)
        .map(|k| s.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (lo, hi)
}

fn d1_cells(a: &[AffineCell], b: &[AffineCell]) -> f64 {
    let boxes_b: Vec<_> = b.iter().map(|c| bbox(&c.simplex)).collect();
    let mut acc = 0.0;
    for ca in a {
        let (lo, hi) = bbox(&ca.simplex);
        let cell_a = cells::from_simplex(&ca.simplex);
        for (cb, (lb, hb)) in b.iter().zip(&boxes_b) {
            if (0..lo.len()).any(|k| hb[k] < lo[k] || lb[k] > hi[k]) {
                continue;
            }
            let cell = cells::intersect(&cell_a, &cells::from_simplex(&cb.simplex));
            if cell.is_empty() {
                continue;
            }
            let g: Vec<f64> = ca.g.iter().zip(&cb.g).map(|(x, y)| x - y).collect();
            let c = ca.c - cb.c;
            let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
            acc += affine_integral(&cells::clip(&cell, &g, c), c, &g);
            acc += affine_integral(&cells::clip(&cell, &neg_g, -c), -c, &neg_g);
        }
    }
    acc
}

fn d1_adaptive(s: &[Vec<f64>], f: &dyn Fn(&[f64]) -> f64, depth: usize) -> f64 {
    let rule = simplex_rule(s, 10);
    let vals: Vec<f64> = rule.iter().map(|nd| f(&nd.x)).collect();
    let corner: Vec<f64> = s.iter().map(|p| f(p)).collect();
    let pos = vals.iter().chain(&corner).any(|&v| v > 0.0);
    let neg = vals.iter().chain(&corner).any(|&v| v < 0.0);
    if depth == 0 || !(pos && neg) {
        return rule.iter().zip(&vals).map(|(nd, v)| nd.w * v.abs()).sum();
    }
    let mid = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter()
            .zip(b)
            .map(|(x, y)| 0.5 * (x + y))
            .collect::<Vec<f64>>()
    };
    let subs: Vec<Vec<Vec<f64>>> = match s.len() {
        2 => {
            let m = mid(&s[0], &s[1]);
            vec![vec![s[0].clone(), m.clone()], vec![m, s[1].clone()]]
        }
        _ => {
            let (m01, m12, m20) = (mid(&s[0], &s[1]), mid(&s[1], &s[2]), mid(&s[2], &s[0]));
            vec![
                vec![s[0].clone(), m01.clone(), m20.clone()],
                vec![m01.clone(), s[1].clone(), m12.clone()],
                vec![m20.clone(), m12.clone(), s[2].clone()],
                vec![m01, m12, m20],
            ]
        }
    };
    subs.iter().map(|t| d1_adaptive(t, f, depth - 1)).sum()
}

/// d₁ = ∫_Δ |u₁ − u₂| dμ.
pub fn d1_distance(
    poly: &DelzantPolytope,
    u1: &ConvexFunction,
    u2: &ConvexFunction,
) -> Result<f64> {
    if poly.dim() > 2 {
        return Err(Error::UnsupportedDimension(poly.dim()));
    }
    if let (Some(a), Some(b)) = (u1.affine_cells(poly), u2.affine_cells(poly)) {
        return Ok(d1_cells(&a, &b));
    }
    let base: Vec<Vec<Vec<f64>>> = match (u1.affine_cells(poly), u2.affine_cells(poly)) {
        (Some(c), _) | (_, Some(c)) => c.into_iter().map(|c| c.simplex).collect(),
        _ => poly.fan().iter().map(|s| s.vertices.clone()).collect(),
    };
    let f = |x: &[f64]| u1.value(x) - u2.value(x);
    let depth = if base.len() > 64 { 4 } else { 8 };
    Ok(base.iter().map(|s| d1_adaptive(s, &f, depth)).sum())
}
