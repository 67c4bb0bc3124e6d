//! Uniform margins by linear programming over hinge-convex grid functions, witness checks,
//! rounded-filtration scans and the continuity path.

use std::sync::Arc;

use serde::Serialize;

use crate::convexfn::{round_to_filtration, ConvexFunction, GridConvexFunction, PlConvexFunction};
use crate::error::{Error, Result};
use crate::functionals::{linear_functional, linear_functional_with, FunctionalReport, DEFAULT_ORDER};
use crate::geometry::{check_positive_weight, DelzantPolytope};
use crate::lp::{Cmp, LinearProgram};
use crate::mesh::Mesh;
use crate::poly::{Polynomial, ScalarField};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    UniformlyStable { margin: f64 },
    Destabilized { value: f64 },
    Inconclusive { resolution: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpDiagnostics {
    pub variables: usize,
    pub constraints: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub margin: f64,
    pub verdict: Verdict,
    pub p_o: Vec<f64>,
    /// ∫_{∂Δ} u* 𝔻 dσ of the witness (1 by normalization).
    pub boundary_integral: f64,
    pub resolution: f64,
    pub lp: LpDiagnostics,
    pub witness: GridConvexFunction,
}

/// Margins below this are not called stable; above its negative, not destabilized.
pub const MARGIN_TOL: f64 = 1e-9;

/// λ* = min L_A(u) over hinge-convex grid u ≥ 0 with u(p_o) = 0 and ∫_{∂Δ} u 𝔻 dσ = 1.
pub fn stability_margin(
    poly: &DelzantPolytope,
    a: &ScalarField,
    d: Option<&ScalarField>,
    resolution: f64,
) -> Result<StabilityReport> {
    let mesh = Arc::new(Mesh::fan_refined(poly, resolution)?);
    stability_margin_on(poly, a, d, mesh, poly.base_point())
}

pub fn stability_margin_on(
    poly: &DelzantPolytope,
    a: &ScalarField,
    d: Option<&ScalarField>,
    mesh: Arc<Mesh>,
    p_o: &[f64],
) -> Result<StabilityReport> {
    let n = poly.dim();
    let unit = Polynomial::constant(n, 1.0);
    let d = match d {
        Some(d) => {
            check_positive_weight(poly, d)?;
            d
        }
        None => &unit,
    };
    if !poly.is_interior(p_o) {
        return Err(Error::NotInterior(p_o.to_vec()));
    }
    // the boundary of an interval is its two endpoints, so in 1-D the count is taken over all nodes
    let counted = if n == 1 { mesh.nodes().len() } else { mesh.boundary_nodes().len() };
    if counted < n + 2 {
        return Err(Error::MeshTooCoarse(format!("{counted} nodes counted, need at least {}", n + 2)));
    }
    let order = a.degree() + d.degree() + 2;
    let bd = mesh.boundary_hat_integrals(|x| d.eval(x), order);
    let it = mesh.hat_integrals(|x| a.eval(x) * d.eval(x), order);
    let nn = mesh.nodes().len();
    let mut lp = LinearProgram::new(nn);
    for i in 0..nn {
        lp.objective[i] = bd[i] - it[i];
    }
    for h in mesh.hinges() {
        lp.add(h.coeffs.clone(), Cmp::Ge, 0.0);
    }
    let c = mesh.locate(p_o);
    let bary = mesh.barycentric(c, p_o);
    let pin: Vec<(usize, f64)> = mesh.cells()[c]
        .iter()
        .zip(&bary)
        .filter(|(_, b)| b.abs() > 1e-14)
        .map(|(&v, &b)| (v, b))
        .collect();
    lp.add(pin, Cmp::Eq, 0.0);
    lp.add(bd.iter().cloned().enumerate().filter(|(_, w)| *w != 0.0).collect(), Cmp::Eq, 1.0);
    let sol = lp.solve().map_err(|e| match e {
        Error::LpUnbounded => Error::LpUnbounded,
        other => other,
    })?;
    let witness = GridConvexFunction::new(mesh.clone(), sol.x.clone())?;
    let margin = sol.objective;
    let boundary_integral: f64 = bd.iter().zip(&sol.x).map(|(b, u)| b * u).sum();
    let verdict = if margin > MARGIN_TOL {
        Verdict::UniformlyStable { margin }
    } else if margin < -MARGIN_TOL {
        // re-verify the sign with an independent quadrature at doubled order
        let check = linear_functional_with(poly, a, &witness.clone().into(), Some(d), 2 * DEFAULT_ORDER)?;
        if check.value < 0.0 {
            Verdict::Destabilized { value: check.value }
        } else {
            Verdict::Inconclusive { resolution: mesh.resolution() }
        }
    } else {
        Verdict::Inconclusive { resolution: mesh.resolution() }
    };
    Ok(StabilityReport {
        margin,
        verdict,
        p_o: p_o.to_vec(),
        boundary_integral,
        resolution: mesh.resolution(),
        lp: LpDiagnostics { variables: nn, constraints: lp.constraints.len(), iterations: sol.iterations },
        witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessVerdict {
    Negative,
    Zero,
    Positive,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub report: FunctionalReport,
    pub verdict: WitnessVerdict,
    pub tolerance: f64,
    pub affine: bool,
}

/// Exact piecewise evaluation of L_A(u) for a PL witness and its sign.
pub fn check_witness(
    poly: &DelzantPolytope,
    a: &ScalarField,
    d: Option<&ScalarField>,
    u: &PlConvexFunction,
) -> Result<WitnessReport> {
    let cu: ConvexFunction = u.clone().into();
    let report = linear_functional(poly, a, &cu, d)?;
    let scale = report.boundary.abs() + report.interior.abs();
    let tolerance = (1e-9 * scale).max(10.0 * report.error_estimate);
    let affine = u.simplify(poly).pieces().len() == 1;
    let verdict = if report.value < -tolerance {
        WitnessVerdict::Negative
    } else if report.value.abs() <= tolerance {
        WitnessVerdict::Zero
    } else {
        WitnessVerdict::Positive
    };
    Ok(WitnessReport { report, verdict, tolerance, affine })
}

#[derive(Clone, Debug, Serialize)]
pub struct KhatRow {
    pub k: u64,
    pub report: FunctionalReport,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KhatScan {
    pub reference: FunctionalReport,
    pub rows: Vec<KhatRow>,
}

/// L_A(u_k) for the rounded approximants k = 1..k_max against L_A(u).
pub fn khat_scan(poly: &DelzantPolytope, a: &ScalarField, u: &ConvexFunction, k_max: u64) -> Result<KhatScan> {
    let reference = linear_functional(poly, a, u, None)?;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let r = match round_to_filtration(u, poly, k) {
            Err(Error::EmptyLattice { .. }) => continue,
            other => other?,
        };
        if !r.hull_matches {
            return Err(Error::HullMismatch { k });
        }
        let report = linear_functional(poly, a, &r.envelope.into(), None)?;
        let gap = (report.value - reference.value).abs();
        rows.push(KhatRow { k, report, gap });
    }
    Ok(KhatScan { reference, rows })
}

/// (A_t, λ_t) = (tA + (1−t)A₀, tλ + (1−t)λ₀).
pub fn continuity_path(a0: &ScalarField, a: &ScalarField, lambda0: f64, lambda: f64, t: f64) -> Result<(ScalarField, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TOutOfRange(t));
    }
    let n = a0.nvars().max(a.nvars());
    let at = a.with_nvars(n).scale(t).add(&a0.with_nvars(n).scale(1.0 - t));
    Ok((at, t * lambda + (1.0 - t) * lambda0))
}

/// A = 𝒮 − h_G.
pub fn scalar_curvature_target(s: &ScalarField, h_g: &ScalarField) -> ScalarField {
    let n = s.nvars().max(h_g.nvars());
    s.with_nvars(n).sub(&h_g.with_nvars(n))
}

/// 𝒮 = A + h_G.
pub fn curvature_from_target(a: &ScalarField, h_g: &ScalarField) -> ScalarField {
    let n = a.nvars().max(h_g.nvars());
    a.with_nvars(n).add(&h_g.with_nvars(n))
}
