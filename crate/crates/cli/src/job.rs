use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use toricstab::abreu::{
    abreu_operator, generalized_abreu_operator, solve_1d, solve_2d, AbreuGrid, Correction, OperatorResidual, Solve1d,
    Solve2dOptions,
};
use toricstab::convexfn::{legendre_transform, truncate, ConvexFunction, XGrid};
use toricstab::destabilizer::{
    boundedness_trace, optimal_destabilizer, truncation_improvement, uniqueness_check,
};
use toricstab::expr::parse_polynomial;
use toricstab::functionals::{
    extremal_affine, filtration_norm_with, linear_functional_with, mabuchi_functional, plain_norm, w_ratio,
    DEFAULT_ORDER,
};
use toricstab::io::{parse_function, parse_potential, polytope_from_value, potential_to_value, to_json};
use toricstab::mesh::Mesh;
use toricstab::stability::{check_witness, khat_scan, stability_margin, Verdict, WitnessVerdict};
use toricstab::{DelzantPolytope, Error, Result, ScalarField};

pub const COMMANDS: [&str; 10] = [
    "margin",
    "witness",
    "khat-scan",
    "destabilize",
    "abreu-residual",
    "solve-1d",
    "solve-2d",
    "functional",
    "legendre",
    "truncate",
];

/// Everything a report depends on. File inputs are embedded, so a report's own `job` field
/// reproduces it.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: String,
    /// Path the polytope was read from (informational).
    #[serde(default)]
    pub polytope: Option<String>,
    /// Parsed polytope file.
    #[serde(default)]
    pub polytope_data: Option<Value>,
    #[serde(default, rename = "A")]
    pub a: Option<String>,
    #[serde(default, rename = "D")]
    pub d: Option<String>,
    #[serde(default, rename = "hG")]
    pub hg: Option<String>,
    #[serde(default)]
    pub u: Option<String>,
    /// Mesh resolution h.
    #[serde(default)]
    pub mesh: Option<f64>,
    #[serde(default)]
    pub rays: Option<usize>,
    #[serde(default)]
    pub k_max: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub trace: Option<Vec<f64>>,
    #[serde(default)]
    pub path_steps: Option<usize>,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub which: Option<String>,
    #[serde(default)]
    pub x_box: Option<f64>,
    #[serde(default)]
    pub x_count: Option<usize>,
    #[serde(default)]
    pub quad_order: Option<usize>,
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub dump_fields: Option<String>,
    #[serde(default)]
    pub potential_out: Option<String>,
}

/// Result of one job: the report body plus what scripts need to branch on.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub result: Value,
    pub verdict: String,
    pub headline: f64,
    /// 0 success, 2 negative mathematical verdict, 1 error.
    pub exit: i32,
    pub error: Option<Error>,
}

impl Outcome {
    fn ok(result: Value, verdict: &str, headline: f64) -> Self {
        Outcome { result, verdict: verdict.into(), headline, exit: 0, error: None }
    }

    fn negative(result: Value, verdict: &str, headline: f64) -> Self {
        Outcome { exit: 2, ..Outcome::ok(result, verdict, headline) }
    }
}

/// `64` and `1/64` both mean h = 1/64; values ≤ 1 are taken as h itself.
pub fn parse_resolution(s: &str) -> Result<f64> {
    let bad = || Error::validation("mesh", format!("`{s}` is not a resolution (use 64, 1/64 or 0.015625)"));
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(v > 0.0) || !v.is_finite() {
        return Err(bad());
    }
    Ok(if v > 1.0 { 1.0 / v } else { v })
}

pub fn read_file(path: &str, field: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::validation(field, format!("cannot read `{path}`: {e}")))
}

impl JobSpec {
    /// Loads referenced files into the spec and records the effective quadrature order.
    pub fn resolve(mut self) -> Result<Self> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(Error::validation("command", format!("unknown command `{}`", self.command)));
        }
        if self.polytope_data.is_none() {
            let path = self
                .polytope
                .clone()
                .ok_or_else(|| Error::validation("polytope", "required"))?;
            let src = read_file(&path, "polytope")?;
            let v: Value = serde_json::from_str(&src).map_err(|e| Error::Parse(format!("polytope: {e}")))?;
            self.polytope_data = Some(v);
        }
        if let Some(u) = &self.u {
            if let Some(path) = u.strip_prefix('@') {
                self.u = Some(read_file(path, "u")?.trim().to_string());
            }
        }
        if self.quad_order.is_none() {
            self.quad_order = Some(quad_order_from_env()?);
        }
        Ok(self)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(to_json(self)?.as_bytes())))
    }

    fn polytope(&self) -> Result<DelzantPolytope> {
        polytope_from_value(self.polytope_data.as_ref().ok_or_else(|| Error::validation("polytope", "required"))?)
    }

    fn field(&self, name: &str, src: &Option<String>, n: usize) -> Result<Option<ScalarField>> {
        src.as_deref()
            .map(|s| {
                parse_polynomial(s, n).map_err(|e| match e {
                    Error::Parse(m) => Error::Parse(format!("{name}: {m}")),
                    e => e,
                })
            })
            .transpose()
    }

    fn target(&self, n: usize) -> Result<ScalarField> {
        let a = self
            .field("A", &self.a, n)?
            .ok_or_else(|| Error::validation("A", format!("required by `{}`", self.command)))?;
        // A = S/h_G when a Hessian weight is given
        match self.field("hG", &self.hg, n)? {
            Some(hg) => Ok(toricstab::stability::curvature_from_target(&a, &hg)),
            None => Ok(a),
        }
    }

    fn function(&self, poly: &DelzantPolytope) -> Result<ConvexFunction> {
        let u = self
            .u
            .as_deref()
            .ok_or_else(|| Error::validation("u", format!("required by `{}`", self.command)))?;
        parse_function(u, poly)
    }

    fn resolution(&self) -> f64 {
        self.mesh.unwrap_or(1.0 / 32.0)
    }
}

pub fn quad_order_from_env() -> Result<usize> {
    match std::env::var("TORICSTAB_QUAD_ORDER") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| (1..=64).contains(&k))
            .ok_or_else(|| Error::validation("TORICSTAB_QUAD_ORDER", format!("`{s}` is not an order in 1..=64"))),
        Err(_) => Ok(DEFAULT_ORDER),
    }
}

fn value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

fn write_text(path: &str, text: &str, field: &str) -> Result<()> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::validation(field, format!("`{path}`: {e}")))?;
    }
    std::fs::write(path, text).map_err(|e| Error::validation(field, format!("cannot write `{path}`: {e}")))
}

fn dump_fields(path: &str, r: &OperatorResidual) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = r.nodes.first().map_or(1, Vec::len);
    let mut header: Vec<String> = (1..=n).map(|k| format!("xi{k}")).collect();
    header.extend(["S", "A", "residual", "w", "det_hessian"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..r.nodes.len() {
        let mut row: Vec<String> = r.nodes[k].iter().map(|v| toricstab::io::format_f64(*v)).collect();
        for v in [r.values[k], r.target[k], r.residual[k], r.w[k]] {
            row.push(toricstab::io::format_f64(v));
        }
        row.push(r.det_hessian[k].map(toricstab::io::format_f64).unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation("dump_fields", e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("CSV is UTF-8"), "dump_fields")
}

pub fn csv_err(e: csv::Error) -> Error {
    Error::validation("output", e.to_string())
}

/// Runs one job. Errors from the toolkit come back as `Outcome` with exit code 1.
pub fn run(job: &JobSpec) -> Outcome {
    match dispatch(job) {
        Ok(o) => o,
        Err(e) => Outcome {
            result: json!({"error": e.to_string()}),
            verdict: "error".into(),
            headline: f64::NAN,
            exit: 1,
            error: Some(e),
        },
    }
}

fn dispatch(job: &JobSpec) -> Result<Outcome> {
    let poly = job.polytope()?;
    let n = poly.dim();
    let order = job.quad_order.unwrap_or(DEFAULT_ORDER);
    let d = job.field("D", &job.d, n)?;
    match job.command.as_str() {
        "margin" => {
            let a = job.target(n)?;
            let r = stability_margin(&poly, &a, d.as_ref(), job.resolution())?;
            let v = value(&r);
            Ok(match r.verdict {
                Verdict::UniformlyStable { .. } => Outcome::ok(v, "uniformly_stable", r.margin),
                Verdict::Inconclusive { .. } => Outcome::ok(v, "inconclusive", r.margin),
                Verdict::Destabilized { .. } => Outcome::negative(v, "destabilized", r.margin),
            })
        }
        "witness" => {
            let a = job.target(n)?;
            let ConvexFunction::Pl(u) = job.function(&poly)? else {
                return Err(Error::validation("u", "witness needs a PL function (pl:max(...))"));
            };
            let r = check_witness(&poly, &a, d.as_ref(), &u)?;
            let value_l = r.report.value;
            let v = value(&r);
            Ok(match r.verdict {
                WitnessVerdict::Negative => Outcome::negative(v, "negative", value_l),
                WitnessVerdict::Zero => Outcome::ok(v, "zero", value_l),
                WitnessVerdict::Positive => Outcome::ok(v, "positive", value_l),
            })
        }
        "khat-scan" => {
            let a = job.target(n)?;
            let u = job.function(&poly)?;
            let r = khat_scan(&poly, &a, &u, job.k_max.unwrap_or(16))?;
            let last = r.rows.last().map_or(f64::NAN, |row| row.gap);
            Ok(Outcome::ok(value(&r), "scanned", last))
        }
        "destabilize" => {
            let a = job.target(n)?;
            let h = job.resolution();
            let seeds = job.seeds.clone().unwrap_or_else(|| vec![0]);
            let first = *seeds.first().ok_or_else(|| Error::validation("seeds", "empty list"))?;
            let r = optimal_destabilizer(&poly, &a, h, first)?;
            let mut v = json!({"destabilizer": value(&r)});
            if r.destabilizing && seeds.len() > 1 {
                v["uniqueness"] = json!(uniqueness_check(&poly, &a, h, &seeds)?);
            }
            if let Some(levels) = &job.trace {
                v["trace"] = value(&boundedness_trace(&poly, &a, levels, first)?);
            }
            Ok(if r.destabilizing {
                Outcome::negative(v, "destabilized", r.w)
            } else {
                Outcome::ok(v, "no_destabilizer", r.w)
            })
        }
        "abreu-residual" => {
            let a = job.target(n)?;
            let u = parse_potential(job.u.as_deref().unwrap_or("guillemin"), &poly)?;
            let stored = match u.correction() {
                Correction::Grid { grid, .. } => Some(grid.cells()),
                Correction::Polynomial(_) => None,
            };
            let grid = AbreuGrid::new(&poly, job.cells.or(stored).unwrap_or(64))?;
            let r = match &d {
                Some(d) => generalized_abreu_operator(&u, &grid, &a, d)?,
                None => abreu_operator(&u, &grid, &a)?,
            };
            if let Some(path) = &job.dump_fields {
                dump_fields(path, &r)?;
            }
            let max = r.max_residual;
            Ok(Outcome::ok(value(&r), "evaluated", max))
        }
        "solve-1d" => {
            let a = job.target(n)?;
            match solve_1d(&poly, &a)? {
                Solve1d::Solved(s) => {
                    if let Some(path) = &job.potential_out {
                        let grid = Arc::new(AbreuGrid::new(&poly, job.cells.unwrap_or(64))?);
                        let u = s.potential(grid)?;
                        write_text(path, &to_json(&potential_to_value(&u))?, "potential_out")?;
                    }
                    let m = s.min_q;
                    Ok(Outcome::ok(value(&Solve1d::Solved(s)), "solved", m))
                }
                Solve1d::Infeasible(c) => {
                    let m = c.min_w;
                    Ok(Outcome::negative(value(&Solve1d::Infeasible(c)), "infeasible", m))
                }
            }
        }
        "solve-2d" => {
            let a = job.target(n)?;
            let defaults = Solve2dOptions::default();
            let opts = Solve2dOptions {
                cells: job.cells.unwrap_or(defaults.cells),
                path_steps: job.path_steps.unwrap_or(defaults.path_steps),
                degree: job.degree.unwrap_or(defaults.degree),
                ..defaults
            };
            let s = solve_2d(&poly, &a, &opts)?;
            if let Some(path) = &job.potential_out {
                write_text(path, &to_json(&potential_to_value(&s.potential))?, "potential_out")?;
            }
            let v = value(&s);
            Ok(match &s.failure {
                None => Outcome::ok(v, "converged", s.max_residual),
                Some(e) => Outcome { exit: 1, error: Some(e.clone()), ..Outcome::ok(v, "stalled", s.t) },
            })
        }
        "functional" => {
            let u = job.function(&poly)?;
            match job.which.as_deref().unwrap_or("linear") {
                "linear" => {
                    let r = linear_functional_with(&poly, &job.target(n)?, &u, d.as_ref(), order)?;
                    Ok(Outcome::ok(value(&r), "evaluated", r.value))
                }
                "mabuchi" => {
                    let f = mabuchi_functional(&poly, &job.target(n)?, &u)?;
                    Ok(Outcome::ok(json!({"value": f}), "evaluated", f))
                }
                "norm" => {
                    let f = filtration_norm_with(&poly, &u, order)?;
                    Ok(Outcome::ok(json!({"value": f}), "evaluated", f))
                }
                "plain-norm" => {
                    let f = plain_norm(&poly, &u)?;
                    Ok(Outcome::ok(json!({"value": f}), "evaluated", f))
                }
                "w" => {
                    let f = w_ratio(&poly, &job.target(n)?, &u)?;
                    Ok(Outcome::ok(json!({"value": f}), "evaluated", f))
                }
                "extremal" => {
                    let e = extremal_affine(&poly, d.as_ref())?;
                    let (c0, g) = e.affine_part();
                    Ok(Outcome::ok(json!({"constant": c0, "gradient": g, "expression": e.to_string()}), "evaluated", c0))
                }
                other => Err(Error::validation(
                    "which",
                    format!("`{other}`: expected linear, mabuchi, norm, plain-norm, w or extremal"),
                )),
            }
        }
        "legendre" => {
            let u = job.function(&poly)?;
            let grid = XGrid::cube(n, job.x_box.unwrap_or(4.0), job.x_count.unwrap_or(41));
            let f = legendre_transform(&u, &poly, &grid)?;
            let nodes: Vec<Vec<f64>> = (0..f.grid.len()).map(|i| f.grid.node(i)).collect();
            let v = json!({
                "center": f.center,
                "f_origin": f.f_origin,
                "box_too_small": f.box_too_small,
                "nodes": nodes,
                "values": f.values,
                "maximizers": f.maximizers,
            });
            Ok(Outcome::ok(v, "evaluated", f.f_origin))
        }
        "truncate" => {
            let u = job.function(&poly)?;
            let h = job.h.ok_or_else(|| Error::validation("h", "required by `truncate`"))?;
            let mesh = Arc::new(Mesh::fan_refined(&poly, job.resolution())?);
            let t = truncate(&u, &poly, h, job.rays.unwrap_or(64), mesh)?;
            let mut v = json!({
                "h": t.h,
                "full_coverage": t.full_coverage,
                "directions": t.radii.directions,
                "r": t.radii.r,
                "R": t.radii.big_r,
                "degenerate": t.radii.degenerate,
                "u_h": value(&t.grid),
            });
            let mut headline = t.radii.r.first().copied().unwrap_or(f64::NAN);
            if job.a.is_some() && !t.full_coverage {
                let imp = truncation_improvement(&poly, &job.target(n)?, &u, h)?;
                headline = imp.difference;
                v["improvement"] = value(&imp);
            }
            Ok(Outcome::ok(v, if t.full_coverage { "full_coverage" } else { "truncated" }, headline))
        }
        other => Err(Error::validation("command", format!("unknown command `{other}`"))),
    }
}

/// The report file: job, its hash, verdict and the command's result.
pub fn report(job: &JobSpec, outcome: &Outcome) -> Result<Value> {
    Ok(json!({
        "job": value(job),
        "job_hash": job.hash()?,
        "verdict": outcome.verdict,
        "headline": outcome.headline,
        "exit_code": outcome.exit,
        "result": outcome.result,
    }))
}
