use rayon::prelude::*;

use crate::job::{run, JobSpec};
use toricstab::io::format_f64;
use toricstab::{Error, Result};

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub param: f64,
    pub status: String,
    pub exit: i32,
    pub verdict: String,
    pub headline: f64,
    pub message: String,
}

/// `start:stop:step` (stop included up to round-off) or `a,b,c`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::validation("values", format!("`{spec}`: {m}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let mut out: Vec<f64> = if parts.len() == 3 {
        let p: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("not numbers"))?;
        let (a, b, s) = (p[0], p[1], p[2]);
        if !(s > 0.0) || b < a {
            return Err(bad("need start ≤ stop and step > 0"));
        }
        let count = ((b - a) / s + 1e-9).floor() as usize;
        (0..=count).map(|i| a + i as f64 * s).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("not a number list"))?
    };
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad("no finite values"));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Instantiates the template at one value; `None` fields stay as they are.
fn instantiate(template: &JobSpec, param: &str, v: f64) -> Result<JobSpec> {
    let mut job = template.clone();
    let token = format!("{{{param}}}");
    let text = format_f64(v);
    for f in [&mut job.a, &mut job.d, &mut job.hg, &mut job.u].into_iter().flatten() {
        *f = f.replace(&token, &format!("({text})"));
    }
    let int = || -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::validation(param, format!("{v} is not a nonnegative integer")))
        }
    };
    match param {
        "mesh" => job.mesh = Some(if v > 1.0 { 1.0 / v } else { v }),
        "h" => job.h = Some(v),
        "cells" => job.cells = Some(int()?),
        "rays" => job.rays = Some(int()?),
        "k_max" => job.k_max = Some(int()? as u64),
        "path_steps" => job.path_steps = Some(int()?),
        "degree" => job.degree = Some(int()?),
        "x_box" => job.x_box = Some(v),
        "x_count" => job.x_count = Some(int()?),
        "seed" => job.seeds = Some(vec![int()? as u64]),
        _ => {}
    }
    // each row writes its own report only if the template names a path with the token
    job.output = None;
    job.dump_fields = None;
    job.potential_out = None;
    Ok(job)
}

const NUMERIC: [&str; 10] = ["mesh", "h", "cells", "rays", "k_max", "path_steps", "degree", "x_box", "x_count", "seed"];

/// Runs the template once per value (rows in parallel) and returns rows ordered by value.
pub fn sweep(template: JobSpec, param: &str, values: &str) -> Result<Vec<SweepRow>> {
    let template = template.resolve()?;
    let token = format!("{{{param}}}");
    let in_strings = [&template.a, &template.d, &template.hg, &template.u]
        .into_iter()
        .flatten()
        .filter(|s| s.contains(&token))
        .count();
    let templated = in_strings + usize::from(NUMERIC.contains(&param));
    if templated != 1 {
        return Err(Error::validation(
            "param",
            format!("`{param}` must template exactly one parameter, found {templated}"),
        ));
    }
    let values = parse_values(values)?;
    let rows = values
        .par_iter()
        .map(|&v| {
            let outcome = match instantiate(&template, param, v) {
                Ok(job) => run(&job),
                Err(e) => return failed(v, &e),
            };
            match &outcome.error {
                Some(e) if outcome.exit == 1 => SweepRow { verdict: outcome.verdict.clone(), ..failed(v, e) },
                _ => SweepRow {
                    param: v,
                    status: "OK".into(),
                    exit: outcome.exit,
                    verdict: outcome.verdict,
                    headline: outcome.headline,
                    message: String::new(),
                },
            }
        })
        .collect();
    Ok(rows)
}

fn failed(v: f64, e: &Error) -> SweepRow {
    SweepRow {
        param: v,
        status: "FAILED".into(),
        exit: 1,
        verdict: "error".into(),
        headline: f64::NAN,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_specs() {
        assert_eq!(parse_values("0:8:0.5").unwrap().len(), 17);
        assert_eq!(parse_values("64,16,32").unwrap(), vec![16.0, 32.0, 64.0]);
        assert!(parse_values("1:0:1").is_err());
        assert!(parse_values("a,b").is_err());
    }
}
