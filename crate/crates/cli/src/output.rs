use std::io::Write;

use serde_json::Value;

use crate::job::{csv_err, read_file, report, JobSpec, Outcome};
use crate::sweep::SweepRow;
use toricstab::io::{format_f64, to_json};
use toricstab::{Error, Result};

/// A job file is either a bare JobSpec or a report with a `job` field.
pub fn load_job(path: &str) -> Result<JobSpec> {
    let src = read_file(path, "job")?;
    let v: Value = serde_json::from_str(&src).map_err(|e| Error::Parse(format!("job: {e}")))?;
    let spec = v.get("job").cloned().unwrap_or(v);
    serde_json::from_value(spec).map_err(|e| Error::validation("job", e.to_string()))
}

/// Leaf values of a JSON tree as `path,value` rows.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::Number(n) => out.push((
            prefix.to_string(),
            if n.is_f64() { format_f64(n.as_f64().unwrap()) } else { n.to_string() },
        )),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

fn emit(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = std::path::Path::new(p).parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::validation("output", e.to_string()))?;
            }
            std::fs::write(p, text).map_err(|e| Error::validation("output", format!("cannot write `{p}`: {e}")))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::validation("output", e.to_string())),
    }
}

pub fn write_report(job: &JobSpec, outcome: &Outcome) -> Result<()> {
    let rep = report(job, outcome)?;
    let text = match job.format.as_deref().unwrap_or("json") {
        "json" => to_json(&rep)? + "\n",
        "csv" => {
            let mut rows = Vec::new();
            flatten("", &rep, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).map_err(csv_err)?;
            for (k, v) in rows {
                w.write_record([k, v]).map_err(csv_err)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::validation("output", e.to_string()))?)
                .expect("CSV is UTF-8")
        }
        other => return Err(Error::validation("format", format!("`{other}`: expected json or csv"))),
    };
    emit(job.output.as_deref(), &text)
}

pub fn write_sweep(rows: &[SweepRow], path: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "status", "exit_code", "verdict", "headline", "message"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format_f64(r.param),
            r.status.clone(),
            r.exit.to_string(),
            r.verdict.clone(),
            if r.headline.is_finite() { format_f64(r.headline) } else { String::new() },
            r.message.clone(),
        ])
        .map_err(csv_err)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| Error::validation("output", e.to_string()))?)
        .expect("CSV is UTF-8");
    emit(path, &text)
}
