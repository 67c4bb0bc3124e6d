use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ConvexFunction, GridConvexFunction};
use crate::error::{Error, Result};
use crate::geometry::DelzantPolytope;
use crate::mesh::Mesh;

/// Integer points α with α/k ∈ Δ̄.
pub fn lattice_points(poly: &DelzantPolytope, k: u64) -> Result<Vec<Vec<i64>>> {
    if k == 0 {
        return Err(Error::validation("k", "must be a positive integer"));
    }
    let n = poly.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let kf = k as f64;
    let (lo, hi) = poly.bounding_box();
    let lo: Vec<i64> = lo.iter().map(|v| (v * kf - 1e-9).ceil() as i64).collect();
    let hi: Vec<i64> = hi.iter().map(|v| (v * kf + 1e-9).floor() as i64).collect();
    let tol = 1e-9 * (1.0 + poly.diameter());
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        let x: Vec<f64> = cur.iter().map(|&i| i as f64 / kf).collect();
        if poly.in_closure(&x, tol) {
            out.push(cur.clone());
        }
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            if cur[d] < hi[d] {
                cur[d] += 1;
                for e in d + 1..n {
                    cur[e] = lo[e];
                }
                break;
            }
        }
    }
}

/// u_k: the lower convex envelope of (α, ⌈k u(α)⌉/k) over the lattice points of Δ̄.
#[derive(Clone, Debug)]
pub struct Rounding {
    pub k: u64,
    pub lattice: Vec<Vec<f64>>,
    /// ⌈k u(α)⌉/k at each lattice point.
    pub rounded: Vec<f64>,
    pub envelope: GridConvexFunction,
    /// The lattice hull is all of Δ̄.
    pub hull_matches: bool,
}

pub fn round_to_filtration(u: &ConvexFunction, poly: &DelzantPolytope, k: u64) -> Result<Rounding> {
    let pts = lattice_points(poly, k)?;
    let n = poly.dim();
    let kf = k as f64;
    let lattice: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().map(|&i| i as f64 / kf).collect())
        .collect();
    let mut heights = Vec::with_capacity(pts.len());
    for x in &lattice {
        let v = u.value(x);
        if !v.is_finite() {
            return Err(Error::validation("u", "not finite at a lattice point"));
        }
        heights.push((kf * v - 1e-9).ceil() as i64);
    }
    let cells = match n {
        1 => lower_hull_1d(&pts, &heights),
        2 => lower_hull_2d(&pts, &heights),
        _ => return Err(Error::UnsupportedDimension(n)),
    };
    if cells.is_empty() {
        return Err(Error::EmptyLattice { k });
    }
    let mut used: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &cells {
        for &v in c {
            let next = used.len();
            used.entry(v).or_insert(next);
        }
    }
    let mut nodes = vec![Vec::new(); used.len()];
    let mut values = vec![0.0; used.len()];
    for (&old, &new) in &used {
        nodes[new] = lattice[old].clone();
        values[new] = heights[old] as f64 / kf;
    }
    let cells: Vec<Vec<usize>> = cells
        .iter()
        .map(|c| c.iter().map(|v| used[v]).collect())
        .collect();
    let mesh = Mesh::from_cells(poly, nodes, cells, 1.0 / kf)?;
    let hull_matches = mesh.open_faces() == 0;
    let envelope = GridConvexFunction::new(Arc::new(mesh), values)?;
    let rounded = heights.iter().map(|&m| m as f64 / kf).collect();
    Ok(Rounding {
        k,
        lattice,
        rounded,
        envelope,
        hull_matches,
    })
}

fn lower_hull_1d(pts: &[Vec<i64>], m: &[i64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| pts[i][0]);
    let cross = |a: usize, b: usize, c: usize| -> i128 {
        let (ax, ay) = (pts[a][0] as i128, m[a] as i128);
        let (bx, by) = (pts[b][0] as i128, m[b] as i128);
        let (cx, cy) = (pts[c][0] as i128, m[c] as i128);
        (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    };
    let mut hull: Vec<usize> = Vec::new();
    for &i in &order {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.windows(2).map(|w| vec![w[0], w[1]]).collect()
}

type P3 = [i128; 3];

fn orient2(a: &P3, b: &P3, c: &P3) -> i128 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Negative when p lies strictly below the plane through a, b, c (counter-clockwise in the plane).
fn below(a: &P3, b: &P3, c: &P3, p: &P3) -> bool {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]);
    det < 0
}

/// Regular triangulation of the lifted points by incremental insertion; points on or above the
/// current lower hull are skipped.
fn lower_hull_2d(pts: &[Vec<i64>], m: &[i64]) -> Vec<Vec<usize>> {
    let np = pts.len();
    if np < 3 {
        return Vec::new();
    }
    let mut p: Vec<P3> = (0..np)
        .map(|i| [pts[i][0] as i128, pts[i][1] as i128, m[i] as i128])
        .collect();
    if (2..np).all(|i| orient2(&p[0], &p[1], &p[i]) == 0) {
        return Vec::new();
    }
    let xs = p.iter().map(|q| q[0]);
    let ys = p.iter().map(|q| q[1]);
    let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
    let mabs = p.iter().map(|q| q[2].abs()).max().unwrap();
    let range = (x1 - x0).max(y1 - y0) + 1;
    let (cx, cy) = ((x0 + x1) / 2, (y0 + y1) / 2);
    let d = 4 * range + 4;
    // the super vertices sit far above every plane spanned by lattice points
    let lift = 16 * (mabs + 1) * (range + 1) * (range + 1) * (d + range + 1);
    p.push([cx - 3 * d, cy - d, lift]);
    p.push([cx + 3 * d, cy - d, lift]);
    p.push([cx, cy + 3 * d, lift]);
    let mut tris: Vec<[usize; 3]> = vec![[np, np + 1, np + 2]];
    // insert in an order that keeps the cavities small
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by_key(|&i| (p[i][2], p[i][0], p[i][1]));
    for &i in &order {
        let q = p[i];
        let (conflict, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .iter()
            .partition(|t| below(&p[t[0]], &p[t[1]], &p[t[2]], &q));
        if conflict.is_empty() {
            continue;
        }
        let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &conflict {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = if e.0 < e.1 { e } else { (e.1, e.0) };
                *edges.entry(key).or_default() += 1;
            }
        }
        tris = keep;
        for t in &conflict {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = if a < b { (a, b) } else { (b, a) };
                if edges[&key] == 1 && orient2(&p[a], &p[b], &q) > 0 {
                    tris.push([a, b, i]);
                }
            }
        }
    }
    tris.into_iter()
        .filter(|t| t.iter().all(|&v| v < np))
        .map(|t| t.to_vec())
        .collect()
}
