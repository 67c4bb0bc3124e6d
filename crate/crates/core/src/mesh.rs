//! Simplicial meshes of Δ (n ≤ 2) with hinge (gradient-jump) rows for convexity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, DelzantPolytope};
use crate::quadrature::{simplex_rule, simplex_volume};

/// Linear form Σ coeff·u_node giving the jump of the piecewise gradient across an interior face.
#[derive(Clone, Debug, PartialEq)]
pub struct Hinge {
    pub face: Vec<usize>,
    pub coeffs: Vec<(usize, f64)>,
}

/// A boundary face of the mesh and the facet it lies on.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub nodes: Vec<usize>,
    pub facet: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<BoundaryFace>,
    hinges: Vec<Hinge>,
    grads: Vec<Vec<Vec<f64>>>,
    volumes: Vec<f64>,
    facet_norms: Vec<f64>,
    resolution: f64,
    locator: Locator,
    open_faces: usize,
}

fn point_key(p: &[f64]) -> Vec<i64> {
    p.iter().map(|x| (x * 1e10).round() as i64).collect()
}

impl Mesh {
    /// Fan triangulation from o, each fan simplex regularly subdivided so that edges are ≤ `h`.
    /// Subdivisions by the same `m` on all fan simplices keep the mesh conforming.
    pub fn fan_refined(poly: &DelzantPolytope, h: f64) -> Result<Mesh> {
        let n = poly.dim();
        if n > 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(h > 0.0) {
            return Err(Error::validation("mesh.resolution", "must be positive"));
        }
        let mut longest = 0.0f64;
        for s in poly.fan() {
            for a in &s.vertices {
                for b in &s.vertices {
                    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    longest = longest.max(norm(&d));
                }
            }
        }
        let m = ((longest / h) - 1e-9).ceil().max(1.0) as usize;
        let mut index: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let mut nodes: Vec<Vec<f64>> = Vec::new();
        let mut node = |p: Vec<f64>, nodes: &mut Vec<Vec<f64>>| -> usize {
            *index.entry(point_key(&p)).or_insert_with(|| {
                nodes.push(p);
                nodes.len() - 1
            })
        };
        let mut cells = Vec::new();
        for s in poly.fan() {
            let v = &s.vertices;
            let at = |i: usize, j: usize| -> Vec<f64> {
                // barycentric (m-i-j, i, j)/m over (v0, v1, v2)
                (0..n)
                    .map(|k| {
                        let mut x = (m - i - j) as f64 * v[0][k] + i as f64 * v[1][k];
                        if n == 2 {
                            x += j as f64 * v[2][k];
                        }
                        x / m as f64
                    })
                    .collect()
            };
            if n == 1 {
                for i in 0..m {
                    let a = node(at(i, 0), &mut nodes);
                    let b = node(at(i + 1, 0), &mut nodes);
                    cells.push(vec![a, b]);
                }
            } else {
                for i in 0..m {
                    for j in 0..(m - i) {
                        let a = node(at(i, j), &mut nodes);
                        let b = node(at(i + 1, j), &mut nodes);
                        let c = node(at(i, j + 1), &mut nodes);
                        cells.push(vec![a, b, c]);
                        if i + j + 1 < m {
                            let d = node(at(i + 1, j + 1), &mut nodes);
                            cells.push(vec![b, d, c]);
                        }
                    }
                }
            }
        }
        Mesh::from_cells(poly, nodes, cells, h)
    }

    /// Builds the mesh data from nodes and cells; faces on ∂Δ get their facet index.
    pub fn from_cells(
        poly: &DelzantPolytope,
        nodes: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
        resolution: f64,
    ) -> Result<Mesh> {
        let n = poly.dim();
        if n > 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        let mut grads = Vec::with_capacity(cells.len());
        let mut volumes = Vec::with_capacity(cells.len());
        for c in &cells {
            let pts: Vec<Vec<f64>> = c.iter().map(|&i| nodes[i].clone()).collect();
            volumes.push(simplex_volume(&pts));
            grads.push(barycentric_gradients(&pts));
        }
        let mut faces: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for (ci, c) in cells.iter().enumerate() {
            for skip in 0..c.len() {
                let mut f: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                faces.entry(f).or_default().push((ci, skip));
            }
        }
        let scale = poly.diameter();
        let mut boundary = Vec::new();
        let mut hinges = Vec::new();
        let mut open_faces = 0;
        for (face, owners) in &faces {
            match owners.as_slice() {
                [_] => {
                    let facet = (0..poly.facets().len()).find(|&i| {
                        face.iter()
                            .all(|&v| poly.l(i, &nodes[v]).abs() <= 1e-10 * (1.0 + scale))
                    });
                    match facet {
                        Some(facet) => boundary.push(BoundaryFace {
                            nodes: face.clone(),
                            facet,
                        }),
                        None => open_faces += 1,
                    }
                }
                [(c1, s1), (c2, _)] => {
                    // unit normal of the face pointing from c1 into c2
                    let g = &grads[*c1][*s1];
                    let gn = norm(g);
                    let nu: Vec<f64> = g.iter().map(|x| -x / gn).collect();
                    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                    for (k, &v) in cells[*c2].iter().enumerate() {
                        *acc.entry(v).or_default() += dot(&grads[*c2][k], &nu);
                    }
                    for (k, &v) in cells[*c1].iter().enumerate() {
                        *acc.entry(v).or_default() -= dot(&grads[*c1][k], &nu);
                    }
                    let coeffs = acc
                        .into_iter()
                        .filter(|(_, c)| c.abs() > 1e-14 * (1.0 + gn))
                        .collect();
                    hinges.push(Hinge {
                        face: face.clone(),
                        coeffs,
                    });
                }
                _ => return Err(Error::MeshTooCoarse("non-manifold face".into())),
            }
        }
        let facet_norms = (0..poly.facets().len())
            .map(|i| poly.facet_norm(i))
            .collect();
        let locator = Locator::new(&nodes, &cells, n);
        Ok(Mesh {
            dim: n,
            nodes,
            cells,
            boundary,
            hinges,
            grads,
            volumes,
            facet_norms,
            resolution,
            locator,
            open_faces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }
    pub fn boundary(&self) -> &[BoundaryFace] {
        &self.boundary
    }
    pub fn hinges(&self) -> &[Hinge] {
        &self.hinges
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn cell_volume(&self, c: usize) -> f64 {
        self.volumes[c]
    }
    /// Faces on the mesh boundary that do not lie on ∂Δ (mesh covers less than Δ̄).
    pub fn open_faces(&self) -> usize {
        self.open_faces
    }

    /// Nodes lying on ∂Δ.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn cell_points(&self, c: usize) -> Vec<Vec<f64>> {
        self.cells[c]
            .iter()
            .map(|&i| self.nodes[i].clone())
            .collect()
    }

    /// Gradient of the interpolant of `values` on cell `c`.
    pub fn cell_gradient(&self, c: usize, values: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (k, &v) in self.cells[c].iter().enumerate() {
            for d in 0..self.dim {
                g[d] += values[v] * self.grads[c][k][d];
            }
        }
        g
    }

    pub fn barycentric(&self, c: usize, x: &[f64]) -> Vec<f64> {
        let p0 = &self.nodes[self.cells[c][0]];
        let d: Vec<f64> = x.iter().zip(p0).map(|(a, b)| a - b).collect();
        let mut b: Vec<f64> = (1..=self.dim).map(|k| dot(&self.grads[c][k], &d)).collect();
        let b0 = 1.0 - b.iter().sum::<f64>();
        b.insert(0, b0);
        b
    }

    /// Cell containing x (or the nearest one in barycentric terms).
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for &c in self.locator.candidates(x) {
            let m = self
                .barycentric(c, x)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if m >= -1e-12 {
                return c;
            }
            if m > best.0 {
                best = (m, c);
            }
        }
        if best.0 > f64::NEG_INFINITY {
            return best.1;
        }
        (0..self.cells.len())
            .map(|c| {
                (
                    self.barycentric(c, x)
                        .into_iter()
                        .fold(f64::INFINITY, f64::min),
                    c,
                )
            })
            .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
            .1
    }

    /// All cells whose closure contains x.
    pub fn cells_containing(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.locator
            .candidates(x)
            .iter()
            .copied()
            .filter(|&c| self.barycentric(c, x).into_iter().all(|b| b >= -tol))
            .collect()
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let c = self.locate(x);
        self.barycentric(c, x)
            .iter()
            .zip(&self.cells[c])
            .map(|(b, &v)| b * values[v])
            .sum()
    }

    /// Consistent P1 mass matrix M_jk = ∫ φ_j φ_k dμ.
    pub fn mass_matrix(&self) -> nalgebra::DMatrix<f64> {
        let nn = self.nodes.len();
        let d = self.dim as f64;
        let mut m = nalgebra::DMatrix::zeros(nn, nn);
        for (c, cell) in self.cells.iter().enumerate() {
            let f = self.volumes[c] / ((d + 1.0) * (d + 2.0));
            for &a in cell {
                for &b in cell {
                    m[(a, b)] += if a == b { 2.0 * f } else { f };
                }
            }
        }
        m
    }

    /// ∫_Δ f φ_j dμ for every hat function φ_j.
    pub fn hat_integrals(&self, f: impl Fn(&[f64]) -> f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (c, cell) in self.cells.iter().enumerate() {
            for nd in simplex_rule(&self.cell_points(c), order + 1) {
                let b = self.barycentric(c, &nd.x);
                let fx = f(&nd.x) * nd.w;
                for (k, &v) in cell.iter().enumerate() {
                    out[v] += fx * b[k];
                }
            }
        }
        out
    }

    /// ∫_∂Δ f φ_j dσ for every hat function φ_j.
    pub fn boundary_hat_integrals(&self, f: impl Fn(&[f64]) -> f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for face in &self.boundary {
            let pts: Vec<Vec<f64>> = face.nodes.iter().map(|&i| self.nodes[i].clone()).collect();
            let inv = 1.0 / self.facet_norms[face.facet];
            for nd in simplex_rule(&pts, order + 1) {
                let fx = f(&nd.x) * nd.w * inv;
                if pts.len() == 1 {
                    out[face.nodes[0]] += fx;
                } else {
                    // barycentric on a segment
                    let l = norm(
                        &pts[1]
                            .iter()
                            .zip(&pts[0])
                            .map(|(a, b)| a - b)
                            .collect::<Vec<_>>(),
                    );
                    let t = norm(
                        &nd.x
                            .iter()
                            .zip(&pts[0])
                            .map(|(a, b)| a - b)
                            .collect::<Vec<_>>(),
                    ) / l;
                    out[face.nodes[0]] += fx * (1.0 - t);
                    out[face.nodes[1]] += fx * t;
                }
            }
        }
        out
    }

    /// Per-face inverse facet norm, for boundary quadrature by callers.
    pub fn facet_density(&self, facet: usize) -> f64 {
        1.0 / self.facet_norms[facet]
    }

    /// Hinge jumps of a nodal function.
    pub fn hinge_jumps(&self, values: &[f64]) -> Vec<f64> {
        self.hinges
            .iter()
            .map(|h| h.coeffs.iter().map(|&(j, c)| c * values[j]).sum())
            .collect()
    }
}

fn barycentric_gradients(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = pts.len() - 1;
    let j = nalgebra::DMatrix::from_fn(d, d, |r, c| pts[c + 1][r] - pts[0][r]);
    let inv = j
        .try_inverse()
        .unwrap_or_else(|| nalgebra::DMatrix::zeros(d, d));
    let mut g: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..d).map(|r| inv[(k, r)]).collect())
        .collect();
    let g0: Vec<f64> = (0..d)
        .map(|r| -g.iter().map(|row| row[r]).sum::<f64>())
        .collect();
    g.insert(0, g0);
    g
}

/// Uniform bucket grid over the mesh bounding box.
#[derive(Clone, Debug)]
struct Locator {
    lo: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(nodes: &[Vec<f64>], cells: &[Vec<usize>], n: usize) -> Self {
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in nodes {
            for k in 0..n {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let per = ((cells.len() as f64).powf(1.0 / n as f64).ceil() as usize).max(1);
        let counts = vec![per; n];
        let step: Vec<f64> = (0..n)
            .map(|k| ((hi[k] - lo[k]) / per as f64).max(1e-300))
            .collect();
        let total: usize = counts.iter().product();
        let mut buckets = vec![Vec::new(); total];
        for (c, cell) in cells.iter().enumerate() {
            let mut a = vec![usize::MAX; n];
            let mut b = vec![0; n];
            for &v in cell {
                for k in 0..n {
                    let t =
                        (((nodes[v][k] - lo[k]) / step[k]).floor().max(0.0) as usize).min(per - 1);
                    a[k] = a[k].min(t);
                    b[k] = b[k].max(t);
                }
            }
            // widen by one bucket to absorb round-off at bucket edges
            let a: Vec<usize> = a.iter().map(|&x| x.saturating_sub(1)).collect();
            let b: Vec<usize> = b.iter().map(|&x| (x + 1).min(per - 1)).collect();
            if n == 1 {
                for i in a[0]..=b[0] {
                    buckets[i].push(c);
                }
            } else {
                for i in a[0]..=b[0] {
                    for j in a[1]..=b[1] {
                        buckets[i * per + j].push(c);
                    }
                }
            }
        }
        Locator {
            lo,
            step,
            counts,
            buckets,
        }
    }

    fn candidates(&self, x: &[f64]) -> &[usize] {
        let mut idx = 0;
        for k in 0..self.counts.len() {
            let t = ((x[k] - self.lo[k]) / self.step[k]).floor();
            let t = if t.is_nan() {
                0
            } else {
                (t.max(0.0) as usize).min(self.counts[k] - 1)
            };
            idx = idx * self.counts[k] + t;
        }
        &self.buckets[idx]
    }
}
