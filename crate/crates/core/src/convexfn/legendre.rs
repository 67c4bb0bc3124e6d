//! Legendre transform in coordinates centred at o, sections of the conjugate and normal images.

use rayon::prelude::*;

use super::{ConvexFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, DelzantPolytope};
use crate::lp::{Cmp, LinearProgram};

/// Regular grid on a box in x-space.
#[derive(Clone, Debug, PartialEq)]
pub struct XGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl XGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::validation("x_box", "inconsistent dimensions"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) || counts.iter().any(|&c| c < 2) {
            return Err(Error::validation(
                "x_box",
                "needs hi > lo and at least 2 nodes per axis",
            ));
        }
        Ok(XGrid { lo, hi, counts })
    }

    /// The cube [−w, w]ⁿ with `count` nodes per axis.
    pub fn cube(n: usize, w: f64, count: usize) -> Self {
        XGrid {
            lo: vec![-w; n],
            hi: vec![w; n],
            counts: vec![count; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / (self.counts[k] - 1) as f64
    }

    /// Largest grid spacing.
    pub fn spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.step(k)).fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            m[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lo[k] + i as f64 * self.step(k))
            .collect()
    }

    pub fn on_box_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.counts)
            .any(|(&i, &c)| i == 0 || i == c - 1)
    }
}

/// Conjugate values on an x-grid, with the maximizing ξ at each node.
#[derive(Clone, Debug)]
pub struct LegendreGrid {
    pub grid: XGrid,
    pub values: Vec<f64>,
    pub maximizers: Vec<Vec<f64>>,
    /// Points tied for the maximum where the maximizer is not unique (PL and grid inputs).
    pub ties: Vec<Vec<Vec<f64>>>,
    /// Exact conjugate at x = 0.
    pub f_origin: f64,
    /// Diagnostic: every box-boundary node has its maximizer on ∂Δ.
    pub box_too_small: bool,
    pub center: Vec<f64>,
}

impl LegendreGrid {
    /// Discrete biconjugate at ξ: max over nodes of ⟨x, ξ − o⟩ − f(x).
    pub fn biconjugate(&self, xi: &[f64]) -> f64 {
        let d: Vec<f64> = xi.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        (0..self.grid.len())
            .map(|i| dot(&self.grid.node(i), &d) - self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn candidates(u: &ConvexFunction, poly: &DelzantPolytope) -> Option<Vec<(Vec<f64>, f64)>> {
    let pts: Vec<Vec<f64>> = match u {
        ConvexFunction::Grid(g) => g.mesh().nodes().to_vec(),
        ConvexFunction::Pl(_) => u
            .affine_cells(poly)?
            .into_iter()
            .flat_map(|c| c.simplex)
            .collect(),
        ConvexFunction::Smooth(_) => return None,
    };
    let key = |p: &Vec<f64>| {
        p.iter()
            .map(|x| (x * 1e11).round() as i64)
            .collect::<Vec<_>>()
    };
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for p in pts {
        if seen.insert(key(&p)) {
            let v = u.value(&p);
            out.push((p, v));
        }
    }
    Some(out)
}

fn best_of(cands: &[(Vec<f64>, f64)], x: &[f64], o: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let vals: Vec<f64> = cands
        .iter()
        .map(|(p, v)| dot(x, &p.iter().zip(o).map(|(a, b)| a - b).collect::<Vec<_>>()) - v)
        .collect();
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + m.abs());
    let tied: Vec<Vec<f64>> = cands
        .iter()
        .zip(&vals)
        .filter(|(_, &v)| v >= m - tol)
        .map(|((p, _), _)| p.clone())
        .collect();
    let dist = |p: &Vec<f64>| norm(&p.iter().zip(o).map(|(a, b)| a - b).collect::<Vec<_>>());
    let arg = tied
        .iter()
        .min_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap())
        .unwrap()
        .clone();
    (m, arg, if tied.len() > 1 { tied } else { Vec::new() })
}

/// f(x) = sup_{ξ∈Δ̄} ⟨x, ξ − o⟩ − u(ξ) and a maximizer.
pub fn conjugate_at(
    u: &ConvexFunction,
    poly: &DelzantPolytope,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    match u {
        ConvexFunction::Pl(_) => conjugate_at_lp(u, poly, x),
        ConvexFunction::Grid(_) => {
            let c = candidates(u, poly).expect("grid candidates");
            let (m, arg, _) = best_of(&c, x, poly.center());
            Ok((m, arg))
        }
        ConvexFunction::Smooth(s) => Ok(smooth_conjugate(s, poly, x)),
    }
}

/// Conjugate of a PL function by linear programming over (ξ, t) with t ≥ every piece.
pub fn conjugate_at_lp(
    u: &ConvexFunction,
    poly: &DelzantPolytope,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let ConvexFunction::Pl(pl) = u else {
        return Err(Error::validation(
            "u",
            "linear-programming conjugate needs a PL function",
        ));
    };
    let n = poly.dim();
    let (lo, _) = poly.bounding_box();
    let t_lo = poly
        .vertices()
        .iter()
        .map(|v| pl.value(&v.point))
        .fold(f64::INFINITY, f64::min)
        - poly.diameter() * pl.pieces().iter().map(|pc| norm(&pc.p)).fold(0.0, f64::max)
        - 1.0;
    // variables y = ξ − lo ≥ 0 and s = t − t_lo ≥ 0
    let mut lp = LinearProgram::new(n + 1);
    for k in 0..n {
        lp.objective[k] = -x[k];
    }
    lp.objective[n] = 1.0;
    for pc in pl.pieces() {
        let mut c: Vec<(usize, f64)> = pc.p.iter().cloned().enumerate().collect();
        c.push((n, -1.0));
        lp.add(c, Cmp::Le, t_lo - pc.c - dot(&pc.p, &lo));
    }
    for i in 0..poly.facets().len() {
        let a = poly.normal(i);
        lp.add(
            a.iter().cloned().enumerate().collect(),
            Cmp::Ge,
            poly.facets()[i].lambda - dot(&a, &lo),
        );
    }
    let sol = lp.solve()?;
    let xi: Vec<f64> = (0..n).map(|k| sol.x[k] + lo[k]).collect();
    let o = poly.center();
    let f = dot(x, &xi.iter().zip(o).map(|(a, b)| a - b).collect::<Vec<_>>()) - pl.value(&xi);
    Ok((f, xi))
}

/// Euclidean projection onto Δ̄ by enumerating active facet sets (n ≤ 3).
pub(crate) fn project_onto(poly: &DelzantPolytope, y: &[f64]) -> Vec<f64> {
    let n = poly.dim();
    let tol = 1e-13 * (1.0 + poly.diameter());
    if poly.in_closure(y, tol) {
        return y.to_vec();
    }
    let m = poly.facets().len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |s: &[usize]| {
        let a = nalgebra::DMatrix::from_fn(s.len(), n, |r, c| poly.normal(s[r])[c]);
        let gram = &a * a.transpose();
        let Some(inv) = gram.clone().try_inverse() else {
            return;
        };
        let resid = nalgebra::DVector::from_fn(s.len(), |r, _| poly.l(s[r], y));
        let shift = a.transpose() * (inv * resid);
        let p: Vec<f64> = (0..n).map(|k| y[k] - shift[k]).collect();
        if poly.in_closure(&p, tol) {
            let d = norm(&p.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
    };
    for i in 0..m {
        consider(&[i]);
        for j in i + 1..m {
            if n >= 2 {
                consider(&[i, j]);
            }
            for k in j + 1..m {
                if n >= 3 {
                    consider(&[i, j, k]);
                }
            }
        }
    }
    match best {
        Some((_, p)) => p,
        None => poly
            .vertices()
            .iter()
            .map(|v| v.point.clone())
            .min_by(|a, b| {
                let da = norm(&a.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
                let db = norm(&b.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
                da.partial_cmp(&db).unwrap()
            })
            .unwrap(),
    }
}

fn smooth_conjugate(u: &SmoothFunction, poly: &DelzantPolytope, x: &[f64]) -> (f64, Vec<f64>) {
    let o = poly.center().to_vec();
    let n = poly.dim();
    let phi = |xi: &[f64]| {
        dot(
            x,
            &xi.iter().zip(&o).map(|(a, b)| a - b).collect::<Vec<_>>(),
        ) - u.value(xi)
    };
    let mut xi = o.clone();
    if u.guillemin().is_some() {
        // Newton ascent kept strictly inside; the maximizer is interior because ∇v blows up at ∂Δ
        for _ in 0..500 {
            let (_, g, h) = u.jet(&xi);
            let grad: Vec<f64> = (0..n).map(|k| x[k] - g[k]).collect();
            let hm = nalgebra::DMatrix::from_fn(n, n, |i, j| h[i][j]);
            let d = match hm.cholesky() {
                Some(ch) => ch
                    .solve(&nalgebra::DVector::from_vec(grad.clone()))
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>(),
                None => grad.clone(),
            };
            let dec = dot(&grad, &d);
            if dec <= 1e-26 * (1.0 + dot(x, x)) {
                break;
            }
            let f0 = phi(&xi);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-30 {
                let cand: Vec<f64> = xi.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if poly.is_interior(&cand) && phi(&cand) >= f0 + 1e-4 * t * dec {
                    xi = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        return (phi(&xi), xi);
    }
    // projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking
    let grad_at = |xi: &[f64]| -> Vec<f64> {
        let g = u.gradient(xi);
        (0..n).map(|k| x[k] - g[k]).collect()
    };
    let mut grad = grad_at(&xi);
    let mut alpha = 1.0;
    for _ in 0..20000 {
        let unit: Vec<f64> = xi.iter().zip(&grad).map(|(a, b)| a + b).collect();
        let pg = project_onto(poly, &unit);
        if norm(&pg.iter().zip(&xi).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-10 {
            break;
        }
        let f0 = phi(&xi);
        let mut next;
        loop {
            let trial: Vec<f64> = xi.iter().zip(&grad).map(|(a, b)| a + alpha * b).collect();
            next = project_onto(poly, &trial);
            let step: Vec<f64> = next.iter().zip(&xi).map(|(a, b)| a - b).collect();
            if phi(&next) >= f0 + 1e-4 * dot(&grad, &step) || alpha < 1e-20 {
                break;
            }
            alpha *= 0.5;
        }
        let ng = grad_at(&next);
        let s: Vec<f64> = next.iter().zip(&xi).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad.iter().zip(&ng).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        alpha = if sy > 1e-300 {
            (dot(&s, &s) / sy).clamp(1e-12, 1e12)
        } else {
            1.0
        };
        if s.iter().all(|v| v.abs() <= 1e-16) {
            xi = next;
            break;
        }
        xi = next;
        grad = ng;
    }
    (phi(&xi), xi)
}

/// Conjugate values on every node of `grid` (node-parallel).
pub fn legendre_transform(
    u: &ConvexFunction,
    poly: &DelzantPolytope,
    grid: &XGrid,
) -> Result<LegendreGrid> {
    if grid.dim() != poly.dim() || u.dim() != poly.dim() {
        return Err(Error::validation(
            "x_box",
            "dimension differs from the polytope",
        ));
    }
    if poly.dim() > 2 {
        return Err(Error::UnsupportedDimension(poly.dim()));
    }
    let o = poly.center().to_vec();
    let cands = candidates(u, poly);
    let results: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            match (&cands, u) {
                (Some(c), _) => best_of(c, &x, &o),
                (None, ConvexFunction::Smooth(s)) => {
                    let (f, m) = smooth_conjugate(s, poly, &x);
                    (f, m, Vec::new())
                }
                _ => unreachable!(),
            }
        })
        .collect();
    let f_origin = match &cands {
        Some(c) => best_of(c, &vec![0.0; poly.dim()], &o).0,
        None => conjugate_at(u, poly, &vec![0.0; poly.dim()])?.0,
    };
    let mut values = Vec::with_capacity(results.len());
    let mut maximizers = Vec::with_capacity(results.len());
    let mut ties = Vec::with_capacity(results.len());
    for (f, m, t) in results {
        values.push(f);
        maximizers.push(m);
        ties.push(t);
    }
    let tol = 1e-9 * (1.0 + poly.diameter());
    let box_too_small = (0..grid.len())
        .filter(|&i| grid.on_box_boundary(i))
        .all(|i| (0..poly.facets().len()).any(|f| poly.l(f, &maximizers[i]) <= tol));
    Ok(LegendreGrid {
        grid: grid.clone(),
        values,
        maximizers,
        ties,
        f_origin,
        box_too_small,
        center: o,
    })
}

/// The sublevel set {f ≤ h} as a node mask plus boundary points.
#[derive(Clone, Debug)]
pub struct Section {
    pub h: f64,
    pub mask: Vec<bool>,
    /// Boundary points ordered by angle around 0 (two points in 1-D).
    pub boundary: Vec<Vec<f64>>,
}

pub fn section_sublevel(f: &LegendreGrid, h: f64) -> Result<Section> {
    if f.f_origin.abs() > 1e-8 * (1.0 + h.abs()) {
        return Err(Error::validation(
            "u",
            format!(
                "conjugate must vanish at 0 (got {}); normalize u at o",
                f.f_origin
            ),
        ));
    }
    let g = &f.grid;
    let mask: Vec<bool> = f.values.iter().map(|&v| v <= h).collect();
    if (0..g.len()).any(|i| mask[i] && g.on_box_boundary(i)) {
        return Err(Error::NotCompact);
    }
    let mut boundary = Vec::new();
    for i in 0..g.len() {
        let mi = g.multi_index(i);
        for k in 0..g.dim() {
            if mi[k] + 1 >= g.counts[k] {
                continue;
            }
            let mut mj = mi.clone();
            mj[k] += 1;
            let j = g.flat_index(&mj);
            if mask[i] != mask[j] {
                let t = (h - f.values[i]) / (f.values[j] - f.values[i]);
                let (xi, xj) = (g.node(i), g.node(j));
                boundary.push(
                    xi.iter()
                        .zip(&xj)
                        .map(|(a, b)| a + t * (b - a))
                        .collect::<Vec<f64>>(),
                );
            }
        }
    }
    boundary.sort_by(|a, b| {
        let ang = |p: &Vec<f64>| if p.len() == 1 { p[0] } else { p[1].atan2(p[0]) };
        ang(a).partial_cmp(&ang(b)).unwrap()
    });
    Ok(Section { h, mask, boundary })
}

/// Per-ray radii of a star-shaped subset of Δ̄ around o, with the exit radii R_e.
#[derive(Clone, Debug)]
pub struct RayRadii {
    pub directions: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub big_r: Vec<f64>,
    pub facets: Vec<usize>,
    /// r_e = R_e on every ray (Case 1).
    pub full_coverage: bool,
    /// The normal map was set-valued on a region (e.g. u affine near o).
    pub degenerate: bool,
}

/// Unit directions: ±1 in 1-D, `rays` equally spaced angles in 2-D.
pub fn direction_grid(n: usize, rays: usize) -> Result<Vec<Vec<f64>>> {
    match n {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => {
            if rays < 3 {
                return Err(Error::validation(
                    "rays",
                    "need at least 3 directions in 2-D",
                ));
            }
            Ok((0..rays)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / rays as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect())
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn ray_bin(n: usize, rays: usize, d: &[f64]) -> usize {
    if n == 1 {
        if d[0] >= 0.0 {
            0
        } else {
            1
        }
    } else {
        let t = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU);
        ((t / (std::f64::consts::TAU / rays as f64)).round() as usize) % rays
    }
}

/// W_h = Df({f ≤ h}) ray by ray, using the identity f(p) = ⟨p, q − o⟩ − u(q) for p ∈ Du(q):
/// q = o + ρe lies in W_h iff ρ·∂⁻u − u(q) ≤ h, which is monotone in ρ.
pub fn normal_image_sublevel(
    u: &ConvexFunction,
    poly: &DelzantPolytope,
    h: f64,
    rays: usize,
) -> Result<RayRadii> {
    let n = poly.dim();
    let dirs = direction_grid(n, rays)?;
    let o = poly.center().to_vec();
    let g = |rho: f64, e: &[f64]| -> f64 {
        let q: Vec<f64> = o.iter().zip(e).map(|(a, b)| a + rho * b).collect();
        let d = u.left_ray_derivative(&q, e);
        if rho == 0.0 {
            -u.value(&q)
        } else {
            rho * d - u.value(&q)
        }
    };
    let mut r = Vec::with_capacity(dirs.len());
    let mut big_r = Vec::with_capacity(dirs.len());
    let mut facets = Vec::with_capacity(dirs.len());
    for e in &dirs {
        let (rr, _, fi) = poly.ray_exit(e);
        big_r.push(rr);
        facets.push(fi);
        r.push(radius_by_bisection(&g, e, rr, h));
    }
    let full_coverage = r.iter().zip(&big_r).all(|(a, b)| *a >= *b * (1.0 - 1e-12));
    Ok(RayRadii {
        directions: dirs,
        r,
        big_r,
        facets,
        full_coverage,
        degenerate: false,
    })
}

pub(crate) fn radius_by_bisection(
    g: &dyn Fn(f64, &[f64]) -> f64,
    e: &[f64],
    big_r: f64,
    h: f64,
) -> f64 {
    if g(big_r, e) <= h {
        return big_r;
    }
    if g(0.0, e) > h {
        return 0.0;
    }
    let (mut a, mut b) = (0.0, big_r);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m, e) <= h {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// W = Df(region) from the sampled maximizers of the nodes in a section.
pub fn normal_image(
    poly: &DelzantPolytope,
    f: &LegendreGrid,
    section: &Section,
    rays: usize,
) -> Result<RayRadii> {
    let n = poly.dim();
    let dirs = direction_grid(n, rays)?;
    let o = poly.center().to_vec();
    let mut r = vec![0.0f64; dirs.len()];
    let mut degenerate = false;
    let add = |p: &[f64], r: &mut Vec<f64>| {
        let d: Vec<f64> = p.iter().zip(&o).map(|(a, b)| a - b).collect();
        let len = norm(&d);
        if len > 1e-14 {
            let b = ray_bin(n, dirs.len(), &d);
            r[b] = r[b].max(len);
        }
    };
    for i in 0..f.grid.len() {
        if !section.mask[i] {
            continue;
        }
        add(&f.maximizers[i], &mut r);
        if !f.ties[i].is_empty() {
            degenerate = true;
            let tied = &f.ties[i];
            for p in tied {
                add(p, &mut r);
            }
            // the whole hull of the tied set is in the image; extend rays through it when it surrounds o
            if n == 2 && tied.len() >= 3 {
                let hull = hull2d(tied);
                let inside = hull.len() >= 3
                    && (0..hull.len()).all(|k| {
                        let (a, b) = (&hull[k], &hull[(k + 1) % hull.len()]);
                        (b[0] - a[0]) * (o[1] - a[1]) - (b[1] - a[1]) * (o[0] - a[0]) >= -1e-12
                    });
                if inside {
                    for (k, e) in dirs.iter().enumerate() {
                        r[k] = r[k].max(ray_exit_polygon(&hull, &o, e));
                    }
                }
            } else if n == 1 {
                let lo = tied.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = tied.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                if lo <= o[0] && o[0] <= hi {
                    r[0] = r[0].max(hi - o[0]);
                    r[1] = r[1].max(o[0] - lo);
                }
            }
        }
    }
    let mut big_r = Vec::new();
    let mut facets = Vec::new();
    for e in &dirs {
        let (rr, _, fi) = poly.ray_exit(e);
        big_r.push(rr);
        facets.push(fi);
    }
    for (a, b) in r.iter_mut().zip(&big_r) {
        *a = a.min(*b);
    }
    let full_coverage = r.iter().zip(&big_r).all(|(a, b)| *a >= *b * (1.0 - 1e-9));
    Ok(RayRadii {
        directions: dirs,
        r,
        big_r,
        facets,
        full_coverage,
        degenerate,
    })
}

/// Counter-clockwise convex hull (monotone chain).
pub(crate) fn hull2d(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: &[f64], a: &[f64], b: &[f64]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Vec<f64>> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], q) <= 0.0
        {
            lower.pop();
        }
        lower.push(q.clone());
    }
    let mut upper: Vec<Vec<f64>> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], q) <= 0.0
        {
            upper.pop();
        }
        upper.push(q.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn ray_exit_polygon(hull: &[Vec<f64>], o: &[f64], e: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..hull.len() {
        let (a, b) = (&hull[k], &hull[(k + 1) % hull.len()]);
        // outward normal of edge a→b for a counter-clockwise ring
        let nrm = [b[1] - a[1], -(b[0] - a[0])];
        let ne = nrm[0] * e[0] + nrm[1] * e[1];
        if ne > 0.0 {
            let t = (nrm[0] * (a[0] - o[0]) + nrm[1] * (a[1] - o[1])) / ne;
            best = best.min(t.max(0.0));
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::super::{guillemin_potential, PlConvexFunction};
    use super::*;
    use crate::geometry::standard::*;
    use crate::poly::Polynomial;
    use approx::assert_relative_eq;

    fn half_square() -> ConvexFunction {
        SmoothFunction::polynomial(Polynomial::from_terms(1, [(vec![2], 0.5)])).into()
    }

    #[test]
    fn conjugate_examples() {
        let iv = interval(-1.0, 1.0);
        let zero: ConvexFunction = PlConvexFunction::from_pairs(&[(vec![0.0], 0.0)])
            .unwrap()
            .into();
        let lg = legendre_transform(&zero, &iv, &XGrid::cube(1, 3.0, 61)).unwrap();
        for i in 0..lg.grid.len() {
            assert_relative_eq!(lg.values[i], lg.grid.node(i)[0].abs(), epsilon = 1e-14);
        }
        assert!(lg.box_too_small);
        let q = half_square();
        for x in [-2.5, -1.0, -0.3, 0.0, 0.7, 1.0, 4.0] {
            let (f, _) = conjugate_at(&q, &iv, &[x]).unwrap();
            let exact: f64 = if x.abs() <= 1.0 {
                x * x / 2.0
            } else {
                x.abs() - 0.5
            };
            assert_relative_eq!(f, exact, epsilon = 1e-12);
        }
        let v: ConvexFunction = guillemin_potential(&iv).into();
        for x in [-20.0, -2.0, 0.0, 0.5, 2.0, 9.0] {
            let (f, m) = conjugate_at(&v, &iv, &[x]).unwrap();
            let exact = 2.0 * (x / 2.0f64).cosh().ln();
            assert_relative_eq!(f, exact, epsilon = 1e-10, max_relative = 1e-12);
            assert_relative_eq!(m[0], (x / 2.0).tanh(), epsilon = 1e-10);
        }
        let (f2, _) = conjugate_at(&v, &iv, &[2.0]).unwrap();
        assert_relative_eq!(f2, 0.86756, epsilon = 1e-5);
    }

    #[test]
    fn lp_and_vertex_conjugates_agree() {
        let sq = square();
        let u: ConvexFunction = PlConvexFunction::from_pairs(&[
            (vec![1.0, 0.5], 0.0),
            (vec![-1.0, 0.0], 0.2),
            (vec![0.0, -2.0], -0.5),
        ])
        .unwrap()
        .into();
        let grid = XGrid::cube(2, 3.0, 9);
        let lg = legendre_transform(&u, &sq, &grid).unwrap();
        for i in 0..grid.len() {
            let (f, _) = conjugate_at_lp(&u, &sq, &grid.node(i)).unwrap();
            assert_relative_eq!(f, lg.values[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn sections() {
        let iv = interval(-1.0, 1.0);
        let v: ConvexFunction = guillemin_potential(&iv).into();
        let lg = legendre_transform(&v, &iv, &XGrid::cube(1, 4.0, 801)).unwrap();
        let s = section_sublevel(&lg, 2.0 * 1f64.cosh().ln()).unwrap();
        assert_eq!(s.boundary.len(), 2);
        assert_relative_eq!(s.boundary[0][0], -2.0, epsilon = 1e-4);
        assert_relative_eq!(s.boundary[1][0], 2.0, epsilon = 1e-4);
        assert_eq!(section_sublevel(&lg, 100.0).unwrap_err(), Error::NotCompact);
        let q = half_square();
        let lg = legendre_transform(&q, &iv, &XGrid::cube(1, 2.0, 401)).unwrap();
        let s = section_sublevel(&lg, 0.5).unwrap();
        assert_relative_eq!(s.boundary[1][0], 1.0, epsilon = 1e-9);
        // W = Df([−1, 1]) = [−1, 1]
        let w = normal_image(&iv, &lg, &s, 2).unwrap();
        assert_relative_eq!(w.r[0], 1.0, epsilon = 1e-9);
        assert!(w.full_coverage);
        // not normalized: f(0) ≠ 0
        let shifted = q.add_affine(1.0, &[0.0]);
        let lg = legendre_transform(&shifted, &iv, &XGrid::cube(1, 2.0, 41)).unwrap();
        assert!(section_sublevel(&lg, 0.5).is_err());
    }

    #[test]
    fn normal_image_of_guillemin_sections() {
        let iv = interval(-1.0, 1.0);
        let v: ConvexFunction = guillemin_potential(&iv).into();
        for h in [0.5, 1.0, 3.0] {
            let exact = normal_image_sublevel(&v, &iv, h, 2).unwrap();
            let x_h = 2.0 * (h / 2.0).exp().acosh();
            assert_relative_eq!(exact.r[0], (x_h / 2.0).tanh(), epsilon = 1e-12);
            assert_relative_eq!(exact.r[1], (x_h / 2.0).tanh(), epsilon = 1e-12);
            assert!(!exact.full_coverage);
        }
        let zero: ConvexFunction = PlConvexFunction::from_pairs(&[(vec![0.0, 0.0], 0.0)])
            .unwrap()
            .into();
        let sq = square();
        let lg = legendre_transform(&zero, &sq, &XGrid::cube(2, 2.0, 21)).unwrap();
        // f = |x|₁ here; the section f ≤ 0.5 contains 0, whose maximizer set is all of Δ̄
        let s = section_sublevel(&lg, 0.5).unwrap();
        let w = normal_image(&sq, &lg, &s, 72).unwrap();
        assert!(w.degenerate);
        assert!(w.full_coverage);
    }

    #[test]
    fn projection_is_nearest_point() {
        let t = simplex2();
        let p = project_onto(&t, &[2.0, 2.0]);
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-14);
        let p = project_onto(&t, &[-1.0, 3.0]);
        assert_eq!(p, vec![0.0, 1.0]);
    }
}
