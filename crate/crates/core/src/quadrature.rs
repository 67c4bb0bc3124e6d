//! Gauss rules on intervals and simplices.

use std::f64::consts::PI;

/// A weighted node.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub x: Vec<f64>,
    pub w: f64,
}

/// Gauss-Legendre nodes and weights on [0, 1] with `q` points.
pub fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    assert!(q >= 1);
    let mut out = Vec::with_capacity(q);
    for i in 0..q {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_and_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points per direction that makes the collapsed rule on a `d`-simplex
/// exact for polynomials of degree `order`.
fn points_for(order: usize, d: usize) -> usize {
    (order + d).div_ceil(2).max(1)
}

/// d-dimensional volume of the simplex spanned by `v` (embedded in any ambient dimension).
pub fn simplex_volume(v: &[Vec<f64>]) -> f64 {
    let d = v.len() - 1;
    if d == 0 {
        return 1.0;
    }
    let e: Vec<Vec<f64>> = (1..=d)
        .map(|k| v[k].iter().zip(&v[0]).map(|(a, b)| a - b).collect())
        .collect();
    let g = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let det = g.determinant().max(0.0);
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    det.sqrt() / fact
}

/// Rule on the simplex with vertices `v`, exact up to degree `order`, weights summing to its volume.
pub fn simplex_rule(v: &[Vec<f64>], order: usize) -> Vec<Node> {
    let d = v.len() - 1;
    let vol = simplex_volume(v);
    let q = points_for(order, d);
    let gl = gauss_legendre(q);
    let mut out = Vec::new();
    let point = |bary: &[f64]| -> Vec<f64> {
        let n = v[0].len();
        let mut x = vec![0.0; n];
        for (b, p) in bary.iter().zip(v) {
            for k in 0..n {
                x[k] += b * p[k];
            }
        }
        x
    };
    match d {
        0 => out.push(Node {
            x: v[0].clone(),
            w: 1.0,
        }),
        1 => {
            for &(s, w) in &gl {
                out.push(Node {
                    x: point(&[1.0 - s, s]),
                    w: w * vol,
                });
            }
        }
        2 => {
            for &(s, ws) in &gl {
                for &(t, wt) in &gl {
                    let b = [1.0 - s, s * (1.0 - t), s * t];
                    out.push(Node {
                        x: point(&b),
                        w: 2.0 * vol * ws * wt * s,
                    });
                }
            }
        }
        3 => {
            for &(s, ws) in &gl {
                for &(t, wt) in &gl {
                    for &(r, wr) in &gl {
                        let b = [1.0 - s, s * (1.0 - t), s * t * (1.0 - r), s * t * r];
                        out.push(Node {
                            x: point(&b),
                            w: 6.0 * vol * ws * wt * wr * s * s * t,
                        });
                    }
                }
            }
        }
        _ => panic!("simplex dimension {d} not supported"),
    }
    out
}

/// Composite Gauss rule on [0, 1] with panels refined geometrically toward the listed ends
/// (`toward_zero`, `toward_one`). Suited to integrands with logarithmic end behaviour.
pub fn graded_rule(
    q: usize,
    levels: usize,
    toward_zero: bool,
    toward_one: bool,
) -> Vec<(f64, f64)> {
    let mut breaks = vec![0.0, 1.0];
    match (toward_zero, toward_one) {
        (false, false) => {}
        (true, false) => {
            breaks = (0..=levels).map(|k| 0.5f64.powi(k as i32)).collect();
            breaks.push(0.0);
            breaks.reverse();
        }
        (false, true) => {
            breaks = vec![0.0];
            breaks.extend((1..=levels).map(|k| 1.0 - 0.5f64.powi(k as i32)));
            breaks.push(1.0);
        }
        (true, true) => {
            let mut left: Vec<f64> = (1..=levels).map(|k| 0.5 * 0.5f64.powi(k as i32)).collect();
            left.reverse();
            breaks = vec![0.0];
            breaks.extend(left.iter());
            breaks.push(0.5);
            breaks.extend(left.iter().rev().map(|x| 1.0 - x));
            breaks.push(1.0);
        }
    }
    let gl = gauss_legendre(q);
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(s, ws) in &gl {
            out.push((a + (b - a) * s, ws * (b - a)));
        }
    }
    out
}
