//! Convex functions on Δ̄: piecewise-linear, grid and smooth symbolic representations,
//! together with the Legendre-side constructions (conjugates, sections, truncation, rounding).

mod legendre;
mod rounding;
mod truncate;

pub use legendre::{
    conjugate_at, conjugate_at_lp, direction_grid, legendre_transform, normal_image,
    normal_image_sublevel, section_sublevel, LegendreGrid, RayRadii, Section, XGrid,
};
pub use rounding::{lattice_points, round_to_filtration, Rounding};
pub use truncate::{truncate, Truncation};

use std::sync::Arc;

use crate::cells::{self, Cell};
use crate::error::{Error, Result};
use crate::geometry::{dot, DelzantPolytope};
use crate::mesh::Mesh;
use crate::poly::Polynomial;

/// Hinge convexity tolerance for grid functions.
pub const TOL_CONVEX: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AffinePiece {
    pub p: Vec<f64>,
    pub c: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.p, x) + self.c
    }
}

/// u(ξ) = max_j (⟨p_j, ξ⟩ + c_j).
#[derive(Clone, Debug, PartialEq)]
pub struct PlConvexFunction {
    pieces: Vec<AffinePiece>,
}

impl PlConvexFunction {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::validation(
                "pieces",
                "at least one affine piece is required",
            ));
        };
        let n = first.p.len();
        let mut out: Vec<AffinePiece> = Vec::new();
        for pc in pieces {
            if pc.p.len() != n {
                return Err(Error::validation(
                    "pieces",
                    "gradients of different lengths",
                ));
            }
            if !pc.c.is_finite() || pc.p.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation("pieces", "non-finite coefficient"));
            }
            if !out.contains(&pc) {
                out.push(pc);
            }
        }
        Ok(PlConvexFunction { pieces: out })
    }

    pub fn from_pairs(pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|(p, c)| AffinePiece {
                    p: p.clone(),
                    c: *c,
                })
                .collect(),
        )
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].p.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|pc| pc.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every coefficient is a rational with denominator at most 1000.
    pub fn is_rational(&self) -> bool {
        let ok =
            |x: f64| (1..=1000).any(|d| ((x * d as f64) - (x * d as f64).round()).abs() < 1e-9);
        self.pieces
            .iter()
            .all(|pc| ok(pc.c) && pc.p.iter().all(|&v| ok(v)))
    }

    /// Region of Δ where piece `j` is the maximum, split along the fan.
    fn piece_region(&self, poly: &DelzantPolytope, j: usize) -> Vec<Cell> {
        let pj = &self.pieces[j];
        let mut out = Vec::new();
        for s in poly.fan() {
            let mut cell = cells::from_simplex(&s.vertices);
            for (k, pk) in self.pieces.iter().enumerate() {
                if k == j {
                    continue;
                }
                let a: Vec<f64> = pj.p.iter().zip(&pk.p).map(|(x, y)| x - y).collect();
                cell = cells::clip(&cell, &a, pj.c - pk.c);
                if cell.is_empty() {
                    break;
                }
            }
            if cells::measure(&cell) > 1e-14 * poly.volume() {
                out.push(cell);
            }
        }
        out
    }

    /// Drops pieces that are not the maximum on an open subset of Δ.
    pub fn simplify(&self, poly: &DelzantPolytope) -> Self {
        let keep: Vec<AffinePiece> = (0..self.pieces.len())
            .filter(|&j| !self.piece_region(poly, j).is_empty())
            .map(|j| self.pieces[j].clone())
            .collect();
        if keep.is_empty() {
            return self.clone();
        }
        PlConvexFunction { pieces: keep }
    }

    pub fn add_affine(&self, c: f64, g: &[f64]) -> Self {
        PlConvexFunction {
            pieces: self
                .pieces
                .iter()
                .map(|pc| AffinePiece {
                    p: pc.p.iter().zip(g).map(|(a, b)| a + b).collect(),
                    c: pc.c + c,
                })
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s > 0.0);
        PlConvexFunction {
            pieces: self
                .pieces
                .iter()
                .map(|pc| AffinePiece {
                    p: pc.p.iter().map(|x| x * s).collect(),
                    c: pc.c * s,
                })
                .collect(),
        }
    }
}

/// Values at the nodes of a fixed mesh, interpolated piecewise linearly.
#[derive(Clone, Debug)]
pub struct GridConvexFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridConvexFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes().len() {
            return Err(Error::validation(
                "values",
                format!(
                    "expected {} values, got {}",
                    mesh.nodes().len(),
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("values", "non-finite value"));
        }
        Ok(GridConvexFunction { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|x| f(x)).collect();
        GridConvexFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.mesh.interpolate(&self.values, x)
    }

    /// Gradient jump across every interior face (the hinge certificate).
    pub fn hinge_certificate(&self) -> Vec<f64> {
        self.mesh.hinge_jumps(&self.values)
    }

    pub fn is_convex(&self) -> bool {
        self.hinge_certificate().iter().all(|&j| j >= -TOL_CONVEX)
    }

    pub fn add_affine(&self, c: f64, g: &[f64]) -> Self {
        let values = self
            .mesh
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(x, v)| v + c + dot(g, x))
            .collect();
        GridConvexFunction {
            mesh: self.mesh.clone(),
            values,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        GridConvexFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Facet data needed to evaluate v = Σ l_i log l_i.
#[derive(Clone, Debug, PartialEq)]
pub struct GuilleminData {
    pub normals: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
}

impl GuilleminData {
    pub fn of(poly: &DelzantPolytope) -> Self {
        GuilleminData {
            normals: (0..poly.facets().len()).map(|i| poly.normal(i)).collect(),
            lambdas: poly.facets().iter().map(|f| f.lambda).collect(),
        }
    }

    pub fn ls(&self, x: &[f64]) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.lambdas)
            .map(|(a, l)| dot(a, x) - l)
            .collect()
    }
}

/// u = v + q where v is the Guillemin potential (optional) and q a polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothFunction {
    dim: usize,
    guillemin: Option<GuilleminData>,
    poly: Polynomial,
}

fn xlogx(l: f64) -> f64 {
    if l <= 0.0 {
        0.0
    } else {
        l * l.ln()
    }
}

impl SmoothFunction {
    pub fn polynomial(q: Polynomial) -> Self {
        SmoothFunction {
            dim: q.nvars(),
            guillemin: None,
            poly: q,
        }
    }

    /// v + q.
    pub fn guillemin_plus(poly: &DelzantPolytope, q: Polynomial) -> Self {
        SmoothFunction {
            dim: poly.dim(),
            guillemin: Some(GuilleminData::of(poly)),
            poly: q.with_nvars(poly.dim()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn guillemin(&self) -> Option<&GuilleminData> {
        self.guillemin.as_ref()
    }

    pub fn polynomial_part(&self) -> &Polynomial {
        &self.poly
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.poly.eval(x);
        if let Some(g) = &self.guillemin {
            for l in g.ls(x) {
                if l < -1e-12 {
                    return f64::NAN;
                }
                v += xlogx(l);
            }
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x).1
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.jet(x).2
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let (mut v, mut g, mut h) = self.poly.jet(x);
        if let Some(gd) = &self.guillemin {
            for (a, l) in gd.normals.iter().zip(gd.ls(x)) {
                v += xlogx(l);
                let d = if l > 0.0 {
                    l.ln() + 1.0
                } else {
                    f64::NEG_INFINITY
                };
                for i in 0..self.dim {
                    g[i] += a[i] * d;
                    for j in 0..self.dim {
                        h[i][j] += a[i] * a[j] / l.max(0.0);
                    }
                }
            }
        }
        (v, g, h)
    }

    pub fn add_affine(&self, c: f64, g: &[f64]) -> Self {
        SmoothFunction {
            dim: self.dim,
            guillemin: self.guillemin.clone(),
            poly: self.poly.add(&Polynomial::affine(c, g)),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(
            self.guillemin.is_none() || s == 1.0,
            "cannot rescale the Guillemin part"
        );
        SmoothFunction {
            dim: self.dim,
            guillemin: None,
            poly: self.poly.scale(s),
        }
    }
}

/// v(ξ) = Σ l_i log l_i with analytic gradient and Hessian.
pub fn guillemin_potential(poly: &DelzantPolytope) -> SmoothFunction {
    SmoothFunction::guillemin_plus(poly, Polynomial::zero(poly.dim()))
}

/// Any of the supported representations.
#[derive(Clone, Debug)]
pub enum ConvexFunction {
    Pl(PlConvexFunction),
    Grid(GridConvexFunction),
    Smooth(SmoothFunction),
}

impl From<PlConvexFunction> for ConvexFunction {
    fn from(u: PlConvexFunction) -> Self {
        ConvexFunction::Pl(u)
    }
}
impl From<GridConvexFunction> for ConvexFunction {
    fn from(u: GridConvexFunction) -> Self {
        ConvexFunction::Grid(u)
    }
}
impl From<SmoothFunction> for ConvexFunction {
    fn from(u: SmoothFunction) -> Self {
        ConvexFunction::Smooth(u)
    }
}

/// An affine restriction of u to a simplex: u = c + ⟨g, ξ⟩ there.
#[derive(Clone, Debug)]
pub struct AffineCell {
    pub simplex: Vec<Vec<f64>>,
    pub c: f64,
    pub g: Vec<f64>,
}

impl ConvexFunction {
    pub fn dim(&self) -> usize {
        match self {
            ConvexFunction::Pl(u) => u.dim(),
            ConvexFunction::Grid(u) => u.mesh.dim(),
            ConvexFunction::Smooth(u) => u.dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunction::Pl(u) => u.value(x),
            ConvexFunction::Grid(u) => u.value(x),
            ConvexFunction::Smooth(u) => u.value(x),
        }
    }

    /// Value with a closure check.
    pub fn value_in(&self, poly: &DelzantPolytope, x: &[f64]) -> Result<f64> {
        if !poly.in_closure(x, 1e-12 * (1.0 + poly.diameter())) {
            return Err(Error::EvaluationOutsideClosure(x.to_vec()));
        }
        Ok(self.value(x))
    }

    pub fn is_guillemin(&self) -> bool {
        matches!(self, ConvexFunction::Smooth(s) if s.guillemin.is_some())
    }

    /// Vertex list of the subdifferential: gradients of the pieces (or cells) active at q.
    pub fn subgradients(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        match self {
            ConvexFunction::Pl(u) => {
                let m = u.value(q);
                let tol = 1e-11 * (1.0 + m.abs());
                for pc in &u.pieces {
                    if pc.eval(q) >= m - tol && !out.contains(&pc.p) {
                        out.push(pc.p.clone());
                    }
                }
            }
            ConvexFunction::Grid(u) => {
                let mut cs = u.mesh.cells_containing(q, 1e-10);
                if cs.is_empty() {
                    cs.push(u.mesh.locate(q));
                }
                for c in cs {
                    let g = u.mesh.cell_gradient(c, &u.values);
                    if !out.iter().any(|h| {
                        h.iter()
                            .zip(&g)
                            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()))
                    }) {
                        out.push(g);
                    }
                }
            }
            ConvexFunction::Smooth(u) => out.push(u.gradient(q)),
        }
        out
    }

    /// Minimum-norm element of the subdifferential.
    pub fn min_norm_subgradient(&self, q: &[f64]) -> Vec<f64> {
        min_norm_in_hull(&self.subgradients(q))
    }

    /// Left derivative of ρ ↦ u(from + ρe) at ρ where x = from + ρe.
    pub fn left_ray_derivative(&self, x: &[f64], e: &[f64]) -> f64 {
        match self {
            ConvexFunction::Smooth(u) => {
                let g = u.gradient(x);
                let d = dot(&g, e);
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
            // for convex u the left derivative is the smallest slope over the subdifferential
            _ => self
                .subgradients(x)
                .iter()
                .map(|p| dot(p, e))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn add_affine(&self, c: f64, g: &[f64]) -> Self {
        match self {
            ConvexFunction::Pl(u) => ConvexFunction::Pl(u.add_affine(c, g)),
            ConvexFunction::Grid(u) => ConvexFunction::Grid(u.add_affine(c, g)),
            ConvexFunction::Smooth(u) => ConvexFunction::Smooth(u.add_affine(c, g)),
        }
    }

    /// Pieces on which u is affine, covering Δ (None for smooth functions).
    pub fn affine_cells(&self, poly: &DelzantPolytope) -> Option<Vec<AffineCell>> {
        match self {
            ConvexFunction::Pl(u) => {
                let mut out = Vec::new();
                for (j, pc) in u.pieces.iter().enumerate() {
                    for cell in u.piece_region(poly, j) {
                        for s in cells::simplices(&cell) {
                            out.push(AffineCell {
                                simplex: s,
                                c: pc.c,
                                g: pc.p.clone(),
                            });
                        }
                    }
                }
                Some(out)
            }
            ConvexFunction::Grid(u) => Some(
                (0..u.mesh.cells().len())
                    .map(|c| {
                        let g = u.mesh.cell_gradient(c, &u.values);
                        let p0 = &u.mesh.nodes()[u.mesh.cells()[c][0]];
                        let c0 = u.values[u.mesh.cells()[c][0]] - dot(&g, p0);
                        AffineCell {
                            simplex: u.mesh.cell_points(c),
                            c: c0,
                            g,
                        }
                    })
                    .collect(),
            ),
            ConvexFunction::Smooth(_) => None,
        }
    }
}

/// Full subdifferential vertex list at q (see [`ConvexFunction::subgradients`]).
pub fn subdifferential(u: &ConvexFunction, q: &[f64]) -> Vec<Vec<f64>> {
    u.subgradients(q)
}

/// Subtracts the supporting affine function at p (minimum-norm subgradient); the result vanishes at p.
pub fn normalize_at(u: &ConvexFunction, p: &[f64]) -> ConvexFunction {
    let s = u.min_norm_subgradient(p);
    let up = u.value(p);
    let c = -up + dot(&s, p);
    let g: Vec<f64> = s.iter().map(|x| -x).collect();
    match u.add_affine(c, &g) {
        ConvexFunction::Pl(w) => ConvexFunction::Pl(drop_zero_gradient_duplicates(w)),
        other => other,
    }
}

fn drop_zero_gradient_duplicates(u: PlConvexFunction) -> PlConvexFunction {
    let mut out: Vec<AffinePiece> = Vec::new();
    for pc in u.pieces {
        if !out.iter().any(|q| {
            q.p.iter().zip(&pc.p).all(|(a, b)| (a - b).abs() < 1e-15) && (q.c - pc.c).abs() < 1e-15
        }) {
            out.push(pc);
        }
    }
    PlConvexFunction { pieces: out }
}

/// Minimum-norm point of the convex hull of a few points in dimension ≤ 2.
pub fn min_norm_in_hull(pts: &[Vec<f64>]) -> Vec<f64> {
    assert!(!pts.is_empty());
    let n = pts[0].len();
    if pts.len() == 1 {
        return pts[0].clone();
    }
    if n == 1 {
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return vec![0.0f64.clamp(lo, hi)];
    }
    // origin inside some triangle of the points → 0
    let cross = |a: &[f64], b: &[f64], c: &[f64]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let z = [0.0, 0.0];
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (&pts[i], &pts[j], &pts[k]);
                let d1 = cross(a, b, &z);
                let d2 = cross(b, c, &z);
                let d3 = cross(c, a, &z);
                let area = cross(a, b, c);
                if area.abs() > 1e-300
                    && ((d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0)
                        || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0))
                {
                    return vec![0.0; n];
                }
            }
        }
    }
    let mut best = pts[0].clone();
    let nrm = |v: &[f64]| dot(v, v);
    for p in pts {
        if nrm(p) < nrm(&best) {
            best = p.clone();
        }
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (&pts[i], &pts[j]);
            let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
            let dd = nrm(&d);
            if dd == 0.0 {
                continue;
            }
            let t = (-dot(a, &d) / dd).clamp(0.0, 1.0);
            let q: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + t * y).collect();
            if nrm(&q) < nrm(&best) {
                best = q;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::standard::*;
    use approx::assert_relative_eq;

    fn pl(pairs: &[(f64, f64)]) -> PlConvexFunction {
        PlConvexFunction::from_pairs(&pairs.iter().map(|&(p, c)| (vec![p], c)).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn guillemin_values() {
        let iv = interval(-1.0, 1.0);
        let v = guillemin_potential(&iv);
        assert_eq!(v.value(&[0.0]), 0.0);
        assert_relative_eq!(v.value(&[1.0]), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert!(ConvexFunction::from(v.clone())
            .value_in(&iv, &[1.5])
            .is_err());
        let sq = square();
        let h = guillemin_potential(&sq).hessian(&[0.0, 0.0]);
        assert_eq!(h, vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn subdifferential_examples() {
        let abs: ConvexFunction = pl(&[(1.0, 0.0), (-1.0, 0.0)]).into();
        let mut d = subdifferential(&abs, &[0.0]);
        d.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(d, vec![vec![-1.0], vec![1.0]]);
        assert_eq!(abs.min_norm_subgradient(&[0.0]), vec![0.0]);
        let iv = interval(-1.0, 1.0);
        let v: ConvexFunction = guillemin_potential(&iv).into();
        assert_eq!(subdifferential(&v, &[0.0]), vec![vec![0.0]]);
        let q: ConvexFunction =
            SmoothFunction::polynomial(Polynomial::from_terms(1, [(vec![2], 0.5)])).into();
        assert_eq!(subdifferential(&q, &[0.5]), vec![vec![0.5]]);
    }

    #[test]
    fn normalize_examples() {
        let sq: ConvexFunction =
            SmoothFunction::polynomial(Polynomial::from_terms(1, [(vec![2], 1.0)])).into();
        let n = normalize_at(&sq, &[0.0]);
        for x in [-1.0, -0.3, 0.7] {
            assert_relative_eq!(n.value(&[x]), x * x, epsilon = 1e-15);
        }
        let lin: ConvexFunction = pl(&[(1.0, 0.0)]).into();
        let n = normalize_at(&lin, &[0.0]);
        for x in [-1.0, 0.5] {
            assert_eq!(n.value(&[x]), 0.0);
        }
        let kink: ConvexFunction = pl(&[(1.0, -0.25), (-1.0, 0.25)]).into();
        let n = normalize_at(&kink, &[0.0]);
        for x in [-1.0, 0.0, 0.25, 0.6, 1.0] {
            assert_relative_eq!(n.value(&[x]), (2.0 * (x - 0.25)).max(0.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn simplify_drops_inactive_pieces() {
        let iv = interval(-1.0, 1.0);
        let u = pl(&[(0.0, 0.0), (1.0, 0.0), (1.0, -5.0)]);
        assert_eq!(u.simplify(&iv).pieces().len(), 2);
        assert!(u.is_rational());
        assert!(!pl(&[(std::f64::consts::PI, 0.0)]).is_rational());
    }

    #[test]
    fn affine_cells_cover_the_polytope() {
        let sq = square();
        let u: ConvexFunction = PlConvexFunction::from_pairs(&[
            (vec![1.0, 0.0], 0.0),
            (vec![0.0, 1.0], 0.1),
            (vec![-1.0, -1.0], 0.0),
        ])
        .unwrap()
        .into();
        let cells = u.affine_cells(&sq).unwrap();
        let area: f64 = cells
            .iter()
            .map(|c| crate::quadrature::simplex_volume(&c.simplex))
            .sum();
        assert_relative_eq!(area, 4.0, max_relative = 1e-13);
        for c in &cells {
            let x: Vec<f64> = (0..2)
                .map(|k| c.simplex.iter().map(|p| p[k]).sum::<f64>() / 3.0)
                .collect();
            assert_relative_eq!(u.value(&x), c.c + dot(&c.g, &x), epsilon = 1e-13);
        }
    }

    #[test]
    fn grid_hinge_certificate() {
        let iv = interval(-1.0, 1.0);
        let mesh = Arc::new(Mesh::fan_refined(&iv, 0.25).unwrap());
        let g = GridConvexFunction::interpolate(mesh.clone(), |x| x[0] * x[0]);
        assert!(g.is_convex());
        let c = GridConvexFunction::interpolate(mesh, |x| -x[0] * x[0]);
        assert!(!c.is_convex());
        let gf: ConvexFunction = g.into();
        let sub = gf.subgradients(&[0.0]);
        assert_eq!(sub.len(), 2);
        assert_relative_eq!(
            gf.left_ray_derivative(&[0.5], &[1.0]),
            0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn min_norm_hull_cases() {
        assert_eq!(
            min_norm_in_hull(&[vec![1.0, 1.0], vec![-1.0, 1.0]]),
            vec![0.0, 1.0]
        );
        assert_eq!(
            min_norm_in_hull(&[vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]]),
            vec![0.0, 0.0]
        );
        assert_eq!(min_norm_in_hull(&[vec![2.0], vec![3.0]]), vec![2.0]);
    }
}

impl serde::Serialize for GridConvexFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GridConvexFunction", 3)?;
        st.serialize_field("nodes", self.mesh.nodes())?;
        st.serialize_field("cells", self.mesh.cells())?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}
