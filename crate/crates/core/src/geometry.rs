//! Delzant polytopes, their lattice-normalized measures and the radial decomposition from o.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, LinearProgram};
use crate::poly::ScalarField;
use crate::quadrature::{simplex_rule, simplex_volume, Node};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    #[serde(rename = "a")]
    pub normal: Vec<i64>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub point: Vec<f64>,
    /// Indices of the facets through this vertex, ascending.
    pub facets: Vec<usize>,
}

/// Simplex of the fan triangulation: `vertices[0]` is the center o, the rest span a piece of `facet`.
#[derive(Clone, Debug, PartialEq)]
pub struct FanSimplex {
    pub facet: usize,
    pub vertices: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DelzantPolytope {
    dim: usize,
    facets: Vec<Facet>,
    vertices: Vec<Vertex>,
    center: Vec<f64>,
    base_point: Vec<f64>,
    facet_cells: Vec<Vec<Vec<Vec<f64>>>>,
    fan: Vec<FanSimplex>,
    volume: f64,
}

/// Interior nodes for dμ and per-facet nodes for dσ.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub order: usize,
    pub interior: Vec<Node>,
    pub facets: Vec<Vec<Node>>,
}

impl QuadratureRule {
    pub fn boundary(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.facets
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.iter().map(move |n| (i, n)))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * m[0][j] * det_i128(&minor)
            })
            .sum(),
    }
}

fn det_rat(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    match n {
        0 => BigRational::from_integer(1.into()),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = BigRational::zero();
            for j in 0..n {
                let minor: Vec<Vec<BigRational>> = m[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, v)| v.clone())
                            .collect()
                    })
                    .collect();
                let t = &m[0][j] * det_rat(&minor);
                if j % 2 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn rank(rows: &[Vec<f64>], n: usize) -> usize {
    let m = nalgebra::DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    m.rank(1e-9)
}

/// Builds and validates a Delzant polytope from facet data (a_i, λ_i), l_i(ξ) = ⟨ξ, a_i⟩ − λ_i.
pub fn build_polytope(facets: Vec<Facet>, p_o: Option<Vec<f64>>) -> Result<DelzantPolytope> {
    if facets.is_empty() {
        return Err(Error::InvalidPolytope("no facets".into()));
    }
    let n = facets[0].normal.len();
    if n == 0 {
        return Err(Error::InvalidPolytope("zero-length normal".into()));
    }
    if n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    for (i, f) in facets.iter().enumerate() {
        if f.normal.len() != n {
            return Err(Error::InvalidPolytope(format!(
                "facet {i} has normal of length {}",
                f.normal.len()
            )));
        }
        if !f.lambda.is_finite() {
            return Err(Error::InvalidPolytope(format!(
                "facet {i} has non-finite lambda"
            )));
        }
        let g = f.normal.iter().fold(0, |g, &a| gcd(g, a));
        if g != 1 {
            return Err(Error::InvalidPolytope(format!(
                "normal of facet {i} is not primitive (gcd {g})"
            )));
        }
    }
    let normals: Vec<Vec<f64>> = facets
        .iter()
        .map(|f| f.normal.iter().map(|&a| a as f64).collect())
        .collect();
    if rank(&normals, n) < n {
        return Err(Error::NotBounded);
    }
    // a nonzero recession direction d has ⟨a_i, d⟩ ≥ 0 for all i, with some strictly positive
    let mut rec = LinearProgram::new(n);
    rec.free = vec![true; n];
    for a in &normals {
        rec.add(a.iter().cloned().enumerate().collect(), Cmp::Ge, 0.0);
    }
    let sum: Vec<(usize, f64)> = (0..n)
        .map(|k| (k, normals.iter().map(|a| a[k]).sum()))
        .collect();
    rec.add(sum, Cmp::Eq, 1.0);
    match rec.solve() {
        Ok(_) => return Err(Error::NotBounded),
        Err(Error::LpInfeasible) => {}
        Err(e) => return Err(e),
    }
    // largest inscribed ball
    let mut cheb = LinearProgram::new(n + 1);
    cheb.free = vec![true; n + 1];
    cheb.objective[n] = -1.0;
    for (a, f) in normals.iter().zip(&facets) {
        let mut c: Vec<(usize, f64)> = a.iter().cloned().enumerate().collect();
        c.push((n, -norm(a)));
        cheb.add(c, Cmp::Ge, f.lambda);
    }
    let scale = 1.0 + facets.iter().fold(0.0f64, |m, f| m.max(f.lambda.abs()));
    let sol = cheb.solve()?;
    if sol.x[n] <= 1e-12 * scale {
        return Err(Error::EmptyInterior);
    }
    let cheb_center: Vec<f64> = sol.x[..n].to_vec();

    let vertices = enumerate_vertices(&facets, n)?;
    let facet_cells: Vec<Vec<Vec<Vec<f64>>>> = (0..facets.len())
        .map(|i| facet_cells(&facets, &vertices, i, n))
        .collect::<Result<_>>()?;

    let fan_from = |c: &[f64]| -> Vec<FanSimplex> {
        let mut fan = Vec::new();
        for (i, cells) in facet_cells.iter().enumerate() {
            for cell in cells {
                let mut v = vec![c.to_vec()];
                v.extend(cell.iter().cloned());
                fan.push(FanSimplex {
                    facet: i,
                    vertices: v,
                });
            }
        }
        fan
    };
    let fan0 = fan_from(&cheb_center);
    let mut vol = 0.0;
    let mut moment = vec![0.0; n];
    for s in &fan0 {
        let w = simplex_volume(&s.vertices);
        vol += w;
        for k in 0..n {
            moment[k] += w * s.vertices.iter().map(|p| p[k]).sum::<f64>() / (n + 1) as f64;
        }
    }
    let center: Vec<f64> = moment.iter().map(|m| m / vol).collect();
    let fan = fan_from(&center);
    let mut poly = DelzantPolytope {
        dim: n,
        facets,
        vertices,
        center: center.clone(),
        base_point: center,
        facet_cells,
        fan,
        volume: vol,
    };
    if let Some(p) = p_o {
        if p.len() != n || !poly.is_interior(&p) {
            return Err(Error::NotInterior(p));
        }
        poly.base_point = p;
    }
    Ok(poly)
}

fn enumerate_vertices(facets: &[Facet], n: usize) -> Result<Vec<Vertex>> {
    let lam: Vec<BigRational> = facets
        .iter()
        .map(|f| BigRational::from_float(f.lambda).expect("finite lambda"))
        .collect();
    let a_rat: Vec<Vec<BigRational>> = facets
        .iter()
        .map(|f| {
            f.normal
                .iter()
                .map(|&a| BigRational::from_integer(BigInt::from(a)))
                .collect()
        })
        .collect();
    let mut found: std::collections::BTreeMap<Vec<BigRational>, Vec<usize>> = Default::default();
    for subset in combinations(facets.len(), n) {
        let m: Vec<Vec<i128>> = subset
            .iter()
            .map(|&i| facets[i].normal.iter().map(|&a| a as i128).collect())
            .collect();
        if det_i128(&m) == 0 {
            continue;
        }
        let mr: Vec<Vec<BigRational>> = subset.iter().map(|&i| a_rat[i].clone()).collect();
        let d = det_rat(&mr);
        let x: Vec<BigRational> = (0..n)
            .map(|k| {
                let mk: Vec<Vec<BigRational>> = mr
                    .iter()
                    .zip(&subset)
                    .map(|(row, &i)| {
                        let mut r = row.clone();
                        r[k] = lam[i].clone();
                        r
                    })
                    .collect();
                det_rat(&mk) / &d
            })
            .collect();
        if found.contains_key(&x) {
            continue;
        }
        let mut active = Vec::new();
        let mut feasible = true;
        for (j, a) in a_rat.iter().enumerate() {
            let l: BigRational =
                a.iter().zip(&x).map(|(p, q)| p * q).sum::<BigRational>() - &lam[j];
            if l.is_negative() {
                feasible = false;
                break;
            }
            if l.is_zero() {
                active.push(j);
            }
        }
        if feasible {
            found.insert(x, active);
        }
    }
    let mut vertices = Vec::new();
    for (x, active) in found {
        let point: Vec<f64> = x.iter().map(|q| q.to_f64().unwrap()).collect();
        if active.len() != n {
            return Err(Error::NotDelzant {
                vertex: point,
                det: format!("non-simple ({} facets meet)", active.len()),
            });
        }
        let m: Vec<Vec<i128>> = active
            .iter()
            .map(|&i| facets[i].normal.iter().map(|&a| a as i128).collect())
            .collect();
        let det = det_i128(&m);
        if det.abs() != 1 {
            return Err(Error::NotDelzant {
                vertex: point,
                det: det.abs().to_string(),
            });
        }
        vertices.push(Vertex {
            point,
            facets: active,
        });
    }
    if vertices.is_empty() {
        return Err(Error::EmptyInterior);
    }
    Ok(vertices)
}

fn facet_cells(
    facets: &[Facet],
    vertices: &[Vertex],
    i: usize,
    n: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let pts: Vec<Vec<f64>> = vertices
        .iter()
        .filter(|v| v.facets.contains(&i))
        .map(|v| v.point.clone())
        .collect();
    if pts.len() < n {
        return Err(Error::InvalidPolytope(format!("facet {i} is redundant")));
    }
    match n {
        1 | 2 => Ok(vec![pts]),
        _ => {
            let k = pts.len() as f64;
            let c: Vec<f64> = (0..3)
                .map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / k)
                .collect();
            let a: Vec<f64> = facets[i].normal.iter().map(|&x| x as f64).collect();
            let mut u1: Vec<f64> = pts[0].iter().zip(&c).map(|(p, q)| p - q).collect();
            let l = norm(&u1);
            u1.iter_mut().for_each(|x| *x /= l);
            let u2 = vec![
                a[1] * u1[2] - a[2] * u1[1],
                a[2] * u1[0] - a[0] * u1[2],
                a[0] * u1[1] - a[1] * u1[0],
            ];
            let mut ordered: Vec<(f64, Vec<f64>)> = pts
                .into_iter()
                .map(|p| {
                    let d: Vec<f64> = p.iter().zip(&c).map(|(x, y)| x - y).collect();
                    (dot(&d, &u2).atan2(dot(&d, &u1)), p)
                })
                .collect();
            ordered.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let ring: Vec<Vec<f64>> = ordered.into_iter().map(|(_, p)| p).collect();
            Ok((1..ring.len() - 1)
                .map(|j| vec![ring[0].clone(), ring[j].clone(), ring[j + 1].clone()])
                .collect())
        }
    }
}

impl DelzantPolytope {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }
    /// The dμ-barycenter o.
    pub fn center(&self) -> &[f64] {
        &self.center
    }
    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }
    pub fn fan(&self) -> &[FanSimplex] {
        &self.fan
    }
    /// Pieces of facet `i` as (n−1)-simplices.
    pub fn facet_cells(&self, i: usize) -> &[Vec<Vec<f64>>] {
        &self.facet_cells[i]
    }
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn normal(&self, i: usize) -> Vec<f64> {
        self.facets[i].normal.iter().map(|&a| a as f64).collect()
    }

    pub fn facet_norm(&self, i: usize) -> f64 {
        norm(&self.normal(i))
    }

    pub fn l(&self, i: usize, x: &[f64]) -> f64 {
        let f = &self.facets[i];
        f.normal
            .iter()
            .zip(x)
            .map(|(&a, &b)| a as f64 * b)
            .sum::<f64>()
            - f.lambda
    }

    pub fn ls(&self, x: &[f64]) -> Vec<f64> {
        (0..self.facets.len()).map(|i| self.l(i, x)).collect()
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        (0..self.facets.len()).all(|i| self.l(i, x) > 0.0)
    }

    /// Membership in the closed polytope with slack `tol` in each l_i.
    pub fn in_closure(&self, x: &[f64], tol: f64) -> bool {
        (0..self.facets.len()).all(|i| self.l(i, x) >= -tol)
    }

    /// Euclidean distance from x to the boundary (x interior).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.facets.len())
            .map(|i| self.l(i, x) / self.facet_norm(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for a in &self.vertices {
            for b in &self.vertices {
                let v: Vec<f64> = a.point.iter().zip(&b.point).map(|(x, y)| x - y).collect();
                d = d.max(norm(&v));
            }
        }
        d
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &self.vertices {
            for k in 0..n {
                lo[k] = lo[k].min(v.point[k]);
                hi[k] = hi[k].max(v.point[k]);
            }
        }
        (lo, hi)
    }

    /// Euclidean (n−1)-volume of facet `i`.
    pub fn facet_euclidean_measure(&self, i: usize) -> f64 {
        self.facet_cells[i].iter().map(|c| simplex_volume(c)).sum()
    }

    /// Vol(∂Δ, dσ).
    pub fn boundary_measure(&self) -> f64 {
        (0..self.facets.len())
            .map(|i| self.facet_euclidean_measure(i) / self.facet_norm(i))
            .sum()
    }

    /// Quadrature for dμ on Δ (fan from o) and dσ on each facet, exact to degree `order`.
    pub fn measures(&self, order: usize) -> QuadratureRule {
        let interior = self
            .fan
            .iter()
            .flat_map(|s| simplex_rule(&s.vertices, order))
            .collect();
        let facets = (0..self.facets.len())
            .map(|i| {
                let inv = 1.0 / self.facet_norm(i);
                self.facet_cells[i]
                    .iter()
                    .flat_map(|c| simplex_rule(c, order))
                    .map(|nd| Node {
                        x: nd.x,
                        w: nd.w * inv,
                    })
                    .collect()
            })
            .collect();
        QuadratureRule {
            order,
            interior,
            facets,
        }
    }

    /// Exit of the ray o + t e: (R_e, q_e, facet); ties go to the lowest facet index.
    pub fn ray_exit(&self, e: &[f64]) -> (f64, Vec<f64>, usize) {
        self.ray_exit_from(&self.center, e)
    }

    pub fn ray_exit_from(&self, from: &[f64], e: &[f64]) -> (f64, Vec<f64>, usize) {
        let mut best = f64::INFINITY;
        let mut facet = usize::MAX;
        for i in 0..self.facets.len() {
            let ae = dot(&self.normal(i), e);
            if ae < 0.0 {
                let t = self.l(i, from) / -ae;
                if t < best * (1.0 - 1e-12) || facet == usize::MAX {
                    best = t;
                    facet = i;
                }
            }
        }
        let q = from.iter().zip(e).map(|(o, d)| o + best * d).collect();
        (best, q, facet)
    }

    /// Points on a barycentric lattice of each fan simplex (including vertices), for sampling checks.
    pub fn sample_points(&self, m: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for s in &self.fan {
            let d = s.vertices.len();
            let mut idx = vec![0usize; d];
            loop {
                let tot: usize = idx.iter().sum();
                if tot == m {
                    let x = (0..self.dim)
                        .map(|k| {
                            idx.iter()
                                .zip(&s.vertices)
                                .map(|(&c, v)| c as f64 * v[k])
                                .sum::<f64>()
                                / m as f64
                        })
                        .collect();
                    out.push(x);
                }
                let mut j = 0;
                loop {
                    if j == d {
                        return dedup_points(out);
                    }
                    idx[j] += 1;
                    if idx.iter().sum::<usize>() <= m {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        }
        out
    }
}

fn dedup_points(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let key = |p: &Vec<f64>| {
        p.iter()
            .map(|x| (x * 1e9).round() as i64)
            .collect::<Vec<_>>()
    };
    let mut seen = std::collections::BTreeSet::new();
    pts.retain(|p| seen.insert(key(p)));
    pts
}

/// Errors with NonpositiveWeight unless 𝔻 > 0 on sampled points of the closed polytope.
pub fn check_positive_weight(poly: &DelzantPolytope, d: &ScalarField) -> Result<()> {
    let mut min = f64::INFINITY;
    for x in poly.sample_points(12).iter().chain(
        poly.measures(d.degree() + 2)
            .interior
            .iter()
            .map(|nd| &nd.x),
    ) {
        min = min.min(d.eval(x));
    }
    if min <= 0.0 {
        return Err(Error::NonpositiveWeight { min });
    }
    Ok(())
}

/// Vol(∂Δ, 𝔻dσ) / Vol(Δ, 𝔻dμ).
pub fn average_density(poly: &DelzantPolytope, d: Option<&ScalarField>) -> Result<f64> {
    let Some(d) = d else {
        return Ok(poly.boundary_measure() / poly.volume());
    };
    check_positive_weight(poly, d)?;
    let rule = poly.measures(d.degree().max(1));
    let num: f64 = rule.boundary().map(|(_, nd)| nd.w * d.eval(&nd.x)).sum();
    let den: f64 = rule.interior.iter().map(|nd| nd.w * d.eval(&nd.x)).sum();
    Ok(num / den)
}

/// Convenience constructors for the standard test polytopes.
pub mod standard {
    use super::*;

    pub fn interval(a: f64, b: f64) -> DelzantPolytope {
        build_polytope(
            vec![
                Facet {
                    normal: vec![1],
                    lambda: a,
                },
                Facet {
                    normal: vec![-1],
                    lambda: -b,
                },
            ],
            None,
        )
        .expect("valid interval")
    }

    pub fn square() -> DelzantPolytope {
        rectangle(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> DelzantPolytope {
        build_polytope(
            vec![
                Facet {
                    normal: vec![1, 0],
                    lambda: x0,
                },
                Facet {
                    normal: vec![-1, 0],
                    lambda: -x1,
                },
                Facet {
                    normal: vec![0, 1],
                    lambda: y0,
                },
                Facet {
                    normal: vec![0, -1],
                    lambda: -y1,
                },
            ],
            None,
        )
        .expect("valid rectangle")
    }

    pub fn simplex2() -> DelzantPolytope {
        build_polytope(
            vec![
                Facet {
                    normal: vec![1, 0],
                    lambda: 0.0,
                },
                Facet {
                    normal: vec![0, 1],
                    lambda: 0.0,
                },
                Facet {
                    normal: vec![-1, -1],
                    lambda: -1.0,
                },
            ],
            None,
        )
        .expect("valid simplex")
    }
}

#[cfg(test)]
mod tests {
    use super::standard::*;
    use super::*;
    use crate::poly::Polynomial;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn f(a: &[i64], l: f64) -> Facet {
        Facet {
            normal: a.to_vec(),
            lambda: l,
        }
    }

    #[test]
    fn interval_basics() {
        let p = interval(-1.0, 1.0);
        assert_eq!(p.vertices().len(), 2);
        assert_eq!(p.center(), &[0.0]);
        assert_relative_eq!(p.volume(), 2.0);
        assert_relative_eq!(p.boundary_measure(), 2.0);
        let (r, q, i) = p.ray_exit(&[1.0]);
        assert_relative_eq!(r, 1.0);
        assert_eq!(q, vec![1.0]);
        assert_eq!(i, 1);
    }

    #[test]
    fn square_and_simplex() {
        let s = square();
        assert_eq!(s.vertices().len(), 4);
        assert_relative_eq!(s.volume(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(s.boundary_measure(), 8.0, max_relative = 1e-14);
        let (r, _, _) = s.ray_exit(&[1.0, 0.0]);
        assert_relative_eq!(r, 1.0, max_relative = 1e-14);
        let h = 0.5f64.sqrt();
        let (r, _, i) = s.ray_exit(&[h, h]);
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(i, 1);

        let t = simplex2();
        assert_relative_eq!(t.volume(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(t.center()[0], 1.0 / 3.0, max_relative = 1e-14);
        let rule = t.measures(4);
        let hyp: f64 = rule.facets[2].iter().map(|n| n.w).sum();
        // Euclidean length √2 with density 1/√2
        assert_relative_eq!(hyp, 1.0, max_relative = 1e-14);
        assert_relative_eq!(t.boundary_measure(), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_invalid_input() {
        assert_eq!(
            build_polytope(vec![f(&[1], -1.0)], None).unwrap_err(),
            Error::NotBounded
        );
        assert_eq!(
            build_polytope(
                vec![f(&[1, 0], 0.0), f(&[-1, 0], -1.0), f(&[0, 1], 0.0)],
                None
            )
            .unwrap_err(),
            Error::NotBounded
        );
        assert_eq!(
            build_polytope(vec![f(&[1], 1.0), f(&[-1], 1.0)], None).unwrap_err(),
            Error::EmptyInterior
        );
        assert!(matches!(
            build_polytope(vec![f(&[2], -1.0), f(&[-1], -1.0)], None),
            Err(Error::InvalidPolytope(_))
        ));
        // triangle with a non-unimodular corner: normals (1,0), (0,1), (-1,-2)
        let e = build_polytope(
            vec![f(&[1, 0], 0.0), f(&[0, 1], 0.0), f(&[-1, -2], -2.0)],
            None,
        )
        .unwrap_err();
        match e {
            Error::NotDelzant { vertex, det } => {
                assert_eq!(det, "2");
                assert_eq!(vertex, vec![0.0, 1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            build_polytope(vec![f(&[1], -1.0), f(&[-1], -1.0)], Some(vec![1.0])),
            Err(Error::NotInterior(_))
        ));
    }

    #[test]
    fn three_dimensional_cube_and_simplex() {
        let cube = build_polytope(
            vec![
                f(&[1, 0, 0], -1.0),
                f(&[-1, 0, 0], -1.0),
                f(&[0, 1, 0], -1.0),
                f(&[0, -1, 0], -1.0),
                f(&[0, 0, 1], -1.0),
                f(&[0, 0, -1], -1.0),
            ],
            None,
        )
        .unwrap();
        assert_eq!(cube.vertices().len(), 8);
        assert_relative_eq!(cube.volume(), 8.0, max_relative = 1e-13);
        assert_relative_eq!(cube.boundary_measure(), 24.0, max_relative = 1e-13);
        let simp = build_polytope(
            vec![
                f(&[1, 0, 0], 0.0),
                f(&[0, 1, 0], 0.0),
                f(&[0, 0, 1], 0.0),
                f(&[-1, -1, -1], -1.0),
            ],
            None,
        )
        .unwrap();
        assert_relative_eq!(simp.volume(), 1.0 / 6.0, max_relative = 1e-13);
        // hypotenuse: Euclidean area √3/2, density 1/√3
        assert_relative_eq!(simp.boundary_measure(), 1.5 + 0.5, max_relative = 1e-13);
    }

    #[test]
    fn average_density_examples() {
        assert_relative_eq!(average_density(&interval(-1.0, 1.0), None).unwrap(), 1.0);
        assert_relative_eq!(
            average_density(&square(), None).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        let d = Polynomial::affine(1.0, &[0.5]);
        assert_relative_eq!(
            average_density(&interval(-1.0, 1.0), Some(&d)).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let bad = Polynomial::affine(0.5, &[1.0]);
        assert!(matches!(
            average_density(&interval(-1.0, 1.0), Some(&bad)),
            Err(Error::NonpositiveWeight { .. })
        ));
    }

    /// ∫ over the unit simplex of x^a y^b = a! b! / (a+b+2)!, pulled back to each fan triangle.
    fn exact_monomial_triangle(v: &[Vec<f64>], a: u32, b: u32) -> f64 {
        let m = vec![
            vec![v[1][0] - v[0][0], v[2][0] - v[0][0]],
            vec![v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let jac = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs();
        let mono = Polynomial::from_terms(2, [(vec![a, b], 1.0)]);
        let pulled = mono.compose_affine(&m, &v[0]);
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        pulled
            .terms()
            .map(|(e, c)| c * fact(e[0]) * fact(e[1]) / fact(e[0] + e[1] + 2))
            .sum::<f64>()
            * jac
    }

    #[test]
    fn measures_are_exact_on_monomials() {
        let hexagon = build_polytope(
            vec![
                f(&[1, 0], -1.0),
                f(&[-1, 0], -1.0),
                f(&[0, 1], -1.0),
                f(&[0, -1], -1.0),
                f(&[1, 1], -1.0),
                f(&[-1, -1], -1.0),
            ],
            None,
        )
        .unwrap();
        for poly in [square(), simplex2(), hexagon] {
            let order = 8;
            let rule = poly.measures(order);
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let q: f64 = rule
                        .interior
                        .iter()
                        .map(|n| n.w * n.x[0].powi(a as i32) * n.x[1].powi(b as i32))
                        .sum();
                    let exact: f64 = poly
                        .fan()
                        .iter()
                        .map(|s| exact_monomial_triangle(&s.vertices, a, b))
                        .sum();
                    assert!(
                        (q - exact).abs() <= 1e-12 * exact.abs().max(1e-3),
                        "{a} {b}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn volume_agrees_with_divergence_theorem() {
        // Vol = (1/n) Σ_i (−λ_i) σ(F_i)
        let trap = build_polytope(
            vec![
                f(&[1, 0], 0.0),
                f(&[0, 1], 0.0),
                f(&[0, -1], -1.0),
                f(&[-1, -1], -3.0),
            ],
            None,
        )
        .unwrap();
        for poly in [square(), simplex2(), trap, interval(-0.3, 2.5)] {
            let n = poly.dim() as f64;
            let div: f64 = (0..poly.facets().len())
                .map(|i| {
                    -poly.facets()[i].lambda * poly.facet_euclidean_measure(i) / poly.facet_norm(i)
                })
                .sum::<f64>()
                / n;
            assert_relative_eq!(poly.volume(), div, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn ray_exit_lands_on_boundary(theta in 0.0f64..std::f64::consts::TAU) {
            let trap = build_polytope(vec![f(&[1, 0], 0.0), f(&[0, 1], 0.0), f(&[0, -1], -1.0), f(&[-1, -1], -3.0)], None).unwrap();
            let e = [theta.cos(), theta.sin()];
            let (r, q, i) = trap.ray_exit(&e);
            prop_assert!(r > 0.0);
            prop_assert!(trap.l(i, &q).abs() <= 1e-12);
            for j in 0..4 {
                prop_assert!(trap.l(j, &q) >= -1e-12);
            }
            // cone bound: cos(e, n_F) ≥ d(o, ∂Δ) / diam
            let nf = trap.normal(i);
            let cosv = -dot(&nf, &e) / norm(&nf);
            prop_assert!(cosv >= trap.boundary_distance(trap.center()) / trap.diameter() - 1e-12);
        }
    }
}
