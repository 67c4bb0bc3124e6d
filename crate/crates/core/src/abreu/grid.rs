use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DelzantPolytope;

/// Tensor grid over the bounding box of Δ, restricted to nodes of Δ̄.
#[derive(Clone, Debug, Serialize)]
pub struct AbreuGrid {
    lo: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
    #[serde(skip)]
    index: Vec<Option<usize>>,
    nodes: Vec<Vec<f64>>,
    #[serde(skip)]
    multi: Vec<Vec<usize>>,
}

impl AbreuGrid {
    /// `cells` intervals along each axis of the bounding box.
    pub fn new(poly: &DelzantPolytope, cells: usize) -> Result<Self> {
        let n = poly.dim();
        if n > 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        if cells < 4 {
            return Err(Error::GridTooCoarse(format!("{cells} cells per axis, need at least 4")));
        }
        let (lo, hi) = poly.bounding_box();
        let spacing: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]) / cells as f64).collect();
        let counts = vec![cells + 1; n];
        let total: usize = counts.iter().product();
        let mut index = vec![None; total];
        let mut nodes = Vec::new();
        let mut multi = Vec::new();
        let scale = 1.0 + lo.iter().chain(&hi).fold(0.0f64, |m, v| m.max(v.abs()));
        for flat in 0..total {
            let mut mi = vec![0; n];
            let mut r = flat;
            for k in 0..n {
                mi[k] = r % counts[k];
                r /= counts[k];
            }
            let x: Vec<f64> = (0..n)
                .map(|k| if mi[k] == cells { hi[k] } else { lo[k] + mi[k] as f64 * spacing[k] })
                .collect();
            if poly.in_closure(&x, 1e-12 * scale) {
                // snap onto facets so that boundary nodes have l_i = 0 exactly where possible
                index[flat] = Some(nodes.len());
                nodes.push(x);
                multi.push(mi);
            }
        }
        Ok(AbreuGrid { lo, spacing, counts, index, nodes, multi })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Intervals per axis.
    pub fn cells(&self) -> usize {
        self.counts[0] - 1
    }

    pub(crate) fn same_nodes(&self, other: &AbreuGrid) -> Result<()> {
        if self.nodes == other.nodes {
            Ok(())
        } else {
            Err(Error::validation("grid", "potential is stored on a different grid"))
        }
    }

    /// Some node must lie outside the facet collar of width 4h.
    pub(crate) fn check_collar(&self, poly: &DelzantPolytope) -> Result<()> {
        let collar = 4.0 * self.spacing.iter().fold(0.0f64, |m, v| m.max(*v));
        if self.nodes.iter().any(|x| poly.boundary_distance(x) > collar) {
            Ok(())
        } else {
            Err(Error::GridTooCoarse("the facet collar covers every node".into()))
        }
    }

    fn neighbor(&self, node: usize, axis: usize, step: i64) -> Option<usize> {
        let mut mi = self.multi[node].clone();
        let j = mi[axis] as i64 + step;
        if j < 0 || j >= self.counts[axis] as i64 {
            return None;
        }
        mi[axis] = j as usize;
        let mut flat = 0;
        for k in (0..mi.len()).rev() {
            flat = flat * self.counts[k] + mi[k];
        }
        self.index[flat]
    }

    /// Neighbours at offsets −3..=3 along `axis` (None where the line leaves Δ̄).
    fn line(&self, node: usize, axis: usize) -> [Option<usize>; 7] {
        let mut out = [None; 7];
        out[3] = Some(node);
        for s in 1..=3i64 {
            if out[(3 - s + 1) as usize].is_some() {
                out[(3 - s) as usize] = self.neighbor(node, axis, -s);
            }
            if out[(3 + s - 1) as usize].is_some() {
                out[(3 + s) as usize] = self.neighbor(node, axis, s);
            }
        }
        out
    }

    /// ∂_axis f: fourth-order central where two neighbours exist on each side, second-order
    /// central or one-sided otherwise.
    pub fn d1_field(&self, f: &[f64], axis: usize) -> Result<Vec<f64>> {
        let h = self.spacing[axis];
        let raw = (0..self.len())
            .map(|k| {
                let l = self.line(k, axis);
                let v = |o: i64| f[l[(3 + o) as usize].unwrap()];
                let has = |o: i64| l[(3 + o) as usize].is_some();
                if has(-2) && has(2) {
                    Some((v(-2) - 8.0 * v(-1) + 8.0 * v(1) - v(2)) / (12.0 * h))
                } else if has(-1) && has(1) {
                    Some((v(1) - v(-1)) / (2.0 * h))
                } else if has(2) {
                    Some((-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h))
                } else if has(-2) {
                    Some((3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h))
                } else {
                    None
                }
            })
            .collect();
        self.fill_short_lines(raw, axis)
    }

    /// ∂²_axis f with the same stencil policy.
    pub fn d2_field(&self, f: &[f64], axis: usize) -> Result<Vec<f64>> {
        let h2 = self.spacing[axis] * self.spacing[axis];
        let raw = (0..self.len())
            .map(|k| {
                let l = self.line(k, axis);
                let v = |o: i64| f[l[(3 + o) as usize].unwrap()];
                let has = |o: i64| l[(3 + o) as usize].is_some();
                if has(-2) && has(2) {
                    Some((-v(-2) + 16.0 * v(-1) - 30.0 * v(0) + 16.0 * v(1) - v(2)) / (12.0 * h2))
                } else if has(-1) && has(1) {
                    Some((v(-1) - 2.0 * v(0) + v(1)) / h2)
                } else if has(3) {
                    Some((2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / h2)
                } else if has(-3) {
                    Some((2.0 * v(0) - 5.0 * v(-1) + 4.0 * v(-2) - v(-3)) / h2)
                } else {
                    None
                }
            })
            .collect();
        self.fill_short_lines(raw, axis)
    }

    /// Nodes whose grid line along `axis` is too short for a stencil (near slanted facets and
    /// vertices) take a linear extrapolation along the other axis.
    fn fill_short_lines(&self, raw: Vec<Option<f64>>, axis: usize) -> Result<Vec<f64>> {
        if raw.iter().all(|v| v.is_some()) {
            return Ok(raw.into_iter().map(|v| v.unwrap()).collect());
        }
        if self.dim() < 2 {
            return Err(Error::GridTooCoarse("fewer than three nodes along the grid line".into()));
        }
        let other = 1 - axis;
        (0..self.len())
            .map(|k| {
                if let Some(v) = raw[k] {
                    return Ok(v);
                }
                let mut best: Option<(usize, f64)> = None;
                for dir in [-1i64, 1] {
                    let mut s = 1;
                    while let Some(j) = self.neighbor(k, other, dir * s) {
                        if let (Some(a), Some(b)) = (raw[j], self.neighbor(j, other, dir).and_then(|i| raw[i])) {
                            let cand = a + s as f64 * (a - b);
                            if best.is_none_or(|(d, _)| (s as usize) < d) {
                                best = Some((s as usize, cand));
                            }
                            break;
                        }
                        s += 1;
                    }
                }
                best.map(|(_, v)| v).ok_or_else(|| {
                    Error::GridTooCoarse(format!("no difference stencil near {:?}", self.nodes[k]))
                })
            })
            .collect()
    }

    pub fn lower_corner(&self) -> &[f64] {
        &self.lo
    }
}
