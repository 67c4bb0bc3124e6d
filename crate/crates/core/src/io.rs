//! File formats for polytopes and convex functions, and JSON output with 17 significant digits.

use std::io;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::abreu::{AbreuGrid, Correction, SymplecticPotential};
use crate::convexfn::{AffinePiece, ConvexFunction, GridConvexFunction, PlConvexFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::expr::{parse_pl_max, parse_polynomial};
use crate::geometry::{build_polytope, DelzantPolytope, Facet};
use crate::mesh::Mesh;
use crate::poly::Polynomial;

fn field<'a>(v: &'a Value, key: &str, ctx: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::validation(ctx, format!("missing field `{key}`")))
}

fn number(v: &Value, ctx: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::validation(ctx, format!("expected a number, got {v}")))
}

fn numbers(v: &Value, ctx: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::validation(ctx, "expected an array of numbers"))?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{ctx}[{i}]")))
        .collect()
}

fn json_parse(src: &str) -> Result<Value> {
    serde_json::from_str(src).map_err(|e| Error::Parse(e.to_string()))
}

/// `{"n": int, "facets": [{"a": [int...], "lambda": number}...], "p_o": [number...]?}`.
pub fn polytope_from_json(src: &str) -> Result<DelzantPolytope> {
    polytope_from_value(&json_parse(src)?)
}

pub fn polytope_from_value(v: &Value) -> Result<DelzantPolytope> {
    let n = field(v, "n", "polytope")?
        .as_u64()
        .ok_or_else(|| Error::validation("n", "expected a positive integer"))? as usize;
    let facets = field(v, "facets", "polytope")?
        .as_array()
        .ok_or_else(|| Error::validation("facets", "expected an array"))?;
    let mut out = Vec::with_capacity(facets.len());
    for (i, f) in facets.iter().enumerate() {
        let ctx = format!("facets[{i}]");
        let a = field(f, "a", &ctx)?
            .as_array()
            .ok_or_else(|| Error::validation(format!("{ctx}.a"), "expected an array"))?;
        if a.len() != n {
            return Err(Error::validation(
                format!("{ctx}.a"),
                format!("{} entries for n = {n}", a.len()),
            ));
        }
        let normal = a
            .iter()
            .map(|x| {
                x.as_i64()
                    .ok_or_else(|| Error::validation(format!("{ctx}.a"), format!("normal entry {x} is not an integer")))
            })
            .collect::<Result<Vec<i64>>>()?;
        let lambda = number(field(f, "lambda", &ctx)?, &format!("{ctx}.lambda"))?;
        out.push(Facet { normal, lambda });
    }
    let p_o = match v.get("p_o") {
        None | Some(Value::Null) => None,
        Some(p) => Some(numbers(p, "p_o")?),
    };
    build_polytope(out, p_o)
}

pub fn polytope_to_value(poly: &DelzantPolytope) -> Value {
    json!({
        "n": poly.dim(),
        "facets": poly.facets(),
        "p_o": poly.base_point(),
    })
}

/// Multi-index keys are comma-separated exponents, e.g. `"2,0"` for ξ₁².
fn coeffs_from_value(v: &Value, n: usize) -> Result<Polynomial> {
    let map = v
        .as_object()
        .ok_or_else(|| Error::validation("coeffs", "expected an object"))?;
    let mut p = Polynomial::zero(n);
    for (k, c) in map {
        let e = k
            .trim_matches(|c| c == '[' || c == ']' || c == '(' || c == ')')
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<u32>, _>>()
            .map_err(|_| Error::validation("coeffs", format!("bad multi-index `{k}`")))?;
        if e.len() != n {
            return Err(Error::validation("coeffs", format!("multi-index `{k}` has {} entries for n = {n}", e.len())));
        }
        p.add_term(e, number(c, &format!("coeffs.{k}"))?);
    }
    Ok(p)
}

fn coeffs_to_value(p: &Polynomial) -> Value {
    let map: serde_json::Map<String, Value> = p
        .terms()
        .map(|(e, c)| {
            let k = e.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            (k, json!(c))
        })
        .collect();
    Value::Object(map)
}

fn longest_edge(nodes: &[Vec<f64>], cells: &[Vec<usize>]) -> f64 {
    let mut h = 0.0f64;
    for c in cells {
        for (i, &a) in c.iter().enumerate() {
            for &b in &c[i + 1..] {
                let d: f64 = nodes[a].iter().zip(&nodes[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                h = h.max(d.sqrt());
            }
        }
    }
    h
}

/// PL `{"pieces": [{"p": [...], "c": number}...]}`, `{"kind": "guillemin"}` (optionally with
/// `coeffs` added), `{"kind": "poly", "coeffs": {...}}`, or a grid function with `nodes`,
/// `cells` and `values`.
pub fn function_from_value(v: &Value, poly: &DelzantPolytope) -> Result<ConvexFunction> {
    let n = poly.dim();
    if let Some(pieces) = v.get("pieces") {
        let pieces = pieces
            .as_array()
            .ok_or_else(|| Error::validation("pieces", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, pc)| {
                let ctx = format!("pieces[{i}]");
                let p = numbers(field(pc, "p", &ctx)?, &format!("{ctx}.p"))?;
                if p.len() != n {
                    return Err(Error::validation(format!("{ctx}.p"), format!("{} entries for n = {n}", p.len())));
                }
                Ok(AffinePiece { p, c: number(field(pc, "c", &ctx)?, &format!("{ctx}.c"))? })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(PlConvexFunction::new(pieces)?.into());
    }
    let grid = v.get("mesh").unwrap_or(v);
    if grid.get("nodes").is_some() {
        let nodes = field(grid, "nodes", "mesh")?
            .as_array()
            .ok_or_else(|| Error::validation("mesh.nodes", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, x)| numbers(x, &format!("mesh.nodes[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let cells = field(grid, "cells", "mesh")?
            .as_array()
            .ok_or_else(|| Error::validation("mesh.cells", "expected an array"))?
            .iter()
            .map(|c| {
                c.as_array()
                    .and_then(|c| c.iter().map(|k| k.as_u64().map(|k| k as usize)).collect::<Option<Vec<_>>>())
                    .filter(|c| c.iter().all(|&k| k < nodes.len()))
                    .ok_or_else(|| Error::validation("mesh.cells", "expected arrays of node indices"))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = numbers(field(v, "values", "grid function")?, "values")?;
        let h = longest_edge(&nodes, &cells);
        let mesh = Mesh::from_cells(poly, nodes, cells, h)?;
        return Ok(GridConvexFunction::new(Arc::new(mesh), values)?.into());
    }
    let kind = field(v, "kind", "function")?
        .as_str()
        .ok_or_else(|| Error::validation("kind", "expected a string"))?;
    let extra = match v.get("coeffs") {
        Some(c) => coeffs_from_value(c, n)?,
        None => Polynomial::zero(n),
    };
    match kind {
        "guillemin" => Ok(SmoothFunction::guillemin_plus(poly, extra).into()),
        "poly" => Ok(SmoothFunction::polynomial(extra).into()),
        other => Err(Error::validation("kind", format!("unknown function kind `{other}`"))),
    }
}

pub fn function_from_json(src: &str, poly: &DelzantPolytope) -> Result<ConvexFunction> {
    function_from_value(&json_parse(src)?, poly)
}

/// Inline forms: `pl:max(e1, ...)`, `poly:<expr>`, `guillemin` and `guillemin+<expr>`.
pub fn parse_function(src: &str, poly: &DelzantPolytope) -> Result<ConvexFunction> {
    let n = poly.dim();
    let s = src.trim();
    if let Some(rest) = s.strip_prefix("pl:") {
        return Ok(PlConvexFunction::from_pairs(&parse_pl_max(rest, n)?)?.into());
    }
    if let Some(rest) = s.strip_prefix("poly:") {
        return Ok(SmoothFunction::polynomial(parse_polynomial(rest, n)?).into());
    }
    if let Some(rest) = s.strip_prefix("guillemin") {
        let rest = rest.trim();
        let extra = match rest.strip_prefix('+') {
            Some(e) => parse_polynomial(e.strip_prefix("poly:").unwrap_or(e), n)?,
            None if rest.is_empty() => Polynomial::zero(n),
            None => return Err(Error::Parse(format!("unexpected `{rest}` after `guillemin`"))),
        };
        return Ok(SmoothFunction::guillemin_plus(poly, extra).into());
    }
    if s.starts_with('{') {
        return function_from_json(s, poly);
    }
    Err(Error::Parse(format!(
        "function `{src}`: expected pl:max(...), poly:<expr>, guillemin[+<expr>] or JSON"
    )))
}

pub fn function_to_value(u: &ConvexFunction) -> Value {
    match u {
        ConvexFunction::Pl(pl) => json!({
            "pieces": pl.pieces().iter().map(|pc| json!({"p": pc.p, "c": pc.c})).collect::<Vec<_>>(),
        }),
        ConvexFunction::Grid(g) => serde_json::to_value(g).expect("grid functions serialize"),
        ConvexFunction::Smooth(s) => match s.guillemin() {
            Some(_) => json!({"kind": "guillemin", "coeffs": coeffs_to_value(s.polynomial_part())}),
            None => json!({"kind": "poly", "coeffs": coeffs_to_value(s.polynomial_part())}),
        },
    }
}

/// Potential file: the polytope, then φ either as polynomial coefficients or as values on
/// the Abreu grid with `cells` intervals per axis.
pub fn potential_to_value(u: &SymplecticPotential) -> Value {
    let poly = polytope_to_value(u.polytope());
    match u.correction() {
        Correction::Polynomial(p) => json!({"polytope": poly, "phi_polynomial": coeffs_to_value(p)}),
        Correction::Grid { grid, values } => json!({
            "polytope": poly,
            "cells": grid.cells(),
            "nodes": grid.nodes(),
            "phi": values,
        }),
    }
}

/// Reads a potential file, or the inline forms `guillemin` / `guillemin+<expr>`.
pub fn parse_potential(src: &str, poly: &DelzantPolytope) -> Result<SymplecticPotential> {
    let s = src.trim();
    if !s.starts_with('{') {
        return match parse_function(s, poly)? {
            ConvexFunction::Smooth(f) if f.guillemin().is_some() => {
                Ok(SymplecticPotential::with_polynomial(poly, f.polynomial_part().clone()))
            }
            _ => Err(Error::validation("u", "a potential is guillemin[+<expr>] or a potential file")),
        };
    }
    let v = json_parse(s)?;
    if let Some(c) = v.get("phi_polynomial") {
        return Ok(SymplecticPotential::with_polynomial(poly, coeffs_from_value(c, poly.dim())?));
    }
    if let Some(phi) = v.get("phi") {
        let cells = field(&v, "cells", "potential")?
            .as_u64()
            .ok_or_else(|| Error::validation("cells", "expected a positive integer"))? as usize;
        let grid = AbreuGrid::new(poly, cells)?;
        let phi = numbers(phi, "phi")?;
        if let Some(nodes) = v.get("nodes") {
            let nodes = nodes
                .as_array()
                .ok_or_else(|| Error::validation("nodes", "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, x)| numbers(x, &format!("nodes[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let same = nodes.len() == grid.len()
                && nodes.iter().zip(grid.nodes()).all(|(a, b)| a.iter().zip(b).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + q.abs())));
            if !same {
                return Err(Error::validation("nodes", "potential was stored on a different grid"));
            }
        }
        return SymplecticPotential::with_grid(poly, Arc::new(grid), phi);
    }
    match function_from_value(&v, poly)? {
        ConvexFunction::Smooth(f) if f.guillemin().is_some() => {
            Ok(SymplecticPotential::with_polynomial(poly, f.polynomial_part().clone()))
        }
        _ => Err(Error::validation("u", "a potential needs `phi`, `phi_polynomial` or kind `guillemin`")),
    }
}

/// Seventeen significant digits, fixed notation for moderate exponents.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..16).contains(&exp) {
        return sci;
    }
    let sign = if mantissa.starts_with('-') { "-" } else { "" };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if exp >= 0 {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{sign}{int}.{frac}")
    } else {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    }
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// Compact JSON with every float written to 17 significant digits.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::validation("report", e.to_string()))?;
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}
