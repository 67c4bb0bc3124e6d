//! Convex cells (intervals, polygons) and clipping by half-spaces, for exact piecewise integration.

/// A convex cell: two endpoints in 1-D, a counter-clockwise vertex ring in 2-D.
pub type Cell = Vec<Vec<f64>>;

/// Keeps the part of `cell` where ⟨a, x⟩ + b ≥ 0.
pub fn clip(cell: &Cell, a: &[f64], b: f64) -> Cell {
    if cell.is_empty() {
        return Vec::new();
    }
    let f = |p: &[f64]| a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() + b;
    if a.len() == 1 {
        let (lo, hi) = (cell[0][0].min(cell[1][0]), cell[0][0].max(cell[1][0]));
        if a[0] == 0.0 {
            return if b >= 0.0 {
                vec![vec![lo], vec![hi]]
            } else {
                Vec::new()
            };
        }
        let t = -b / a[0];
        let (lo, hi) = if a[0] > 0.0 {
            (lo.max(t), hi)
        } else {
            (lo, hi.min(t))
        };
        return if hi > lo {
            vec![vec![lo], vec![hi]]
        } else {
            Vec::new()
        };
    }
    let k = cell.len();
    let scale = cell
        .iter()
        .map(|p| p.iter().map(|x| x.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let tol = 1e-13 * (a.iter().map(|x| x.abs()).sum::<f64>() * scale + b.abs());
    // values within round-off of the line count as on it
    let vals: Vec<f64> = cell
        .iter()
        .map(|p| {
            let v = f(p);
            if v.abs() <= tol {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut out = Vec::with_capacity(k + 1);
    for i in 0..k {
        let p = &cell[i];
        let q = &cell[(i + 1) % k];
        let fp = vals[i];
        let fq = vals[(i + 1) % k];
        if fp >= 0.0 {
            out.push(p.clone());
        }
        if (fp > 0.0 && fq < 0.0) || (fp < 0.0 && fq > 0.0) {
            let t = fp / (fp - fq);
            out.push(p.iter().zip(q).map(|(x, y)| x + t * (y - x)).collect());
        }
    }
    if out.len() < 3 {
        return Vec::new();
    }
    out
}

/// Intersection of two convex cells.
pub fn intersect(a: &Cell, b: &Cell) -> Cell {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a[0].len() == 1 {
        let lo = a[0][0].min(a[1][0]).max(b[0][0].min(b[1][0]));
        let hi = a[0][0].max(a[1][0]).min(b[0][0].max(b[1][0]));
        return if hi > lo {
            vec![vec![lo], vec![hi]]
        } else {
            Vec::new()
        };
    }
    let mut out = a.clone();
    let k = b.len();
    for i in 0..k {
        let p = &b[i];
        let q = &b[(i + 1) % k];
        // left side of p→q for a counter-clockwise ring
        let n = [-(q[1] - p[1]), q[0] - p[0]];
        let c = -(n[0] * p[0] + n[1] * p[1]);
        out = clip(&out, &n, c);
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Signed area of a vertex ring (positive for counter-clockwise).
pub fn signed_area(ring: &Cell) -> f64 {
    let k = ring.len();
    (0..k)
        .map(|i| ring[i][0] * ring[(i + 1) % k][1] - ring[(i + 1) % k][0] * ring[i][1])
        .sum::<f64>()
        / 2.0
}

/// Measure of a cell.
pub fn measure(cell: &Cell) -> f64 {
    if cell.is_empty() {
        0.0
    } else if cell[0].len() == 1 {
        (cell[1][0] - cell[0][0]).abs()
    } else {
        signed_area(cell).abs()
    }
}

/// Splits a cell into simplices (vertex lists).
pub fn simplices(cell: &Cell) -> Vec<Vec<Vec<f64>>> {
    if cell.is_empty() {
        return Vec::new();
    }
    if cell[0].len() == 1 {
        return vec![cell.clone()];
    }
    (1..cell.len() - 1)
        .map(|j| vec![cell[0].clone(), cell[j].clone(), cell[j + 1].clone()])
        .collect()
}

/// A simplex as a cell (orients triangles counter-clockwise).
pub fn from_simplex(s: &[Vec<f64>]) -> Cell {
    let mut c = s.to_vec();
    if c[0].len() == 2 && signed_area(&c) < 0.0 {
        c.swap(1, 2);
    }
    c
}
