use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const INTERVAL: &str = r#"{"n":1,"facets":[{"a":[1],"lambda":-1},{"a":[-1],"lambda":-1}]}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_toricstab"));
    c.env_remove("TORICSTAB_QUAD_ORDER");
    c
}

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("interval.json");
    std::fs::write(&p, INTERVAL).unwrap();
    (dir, p)
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

#[test]
fn margin_on_constant_target() {
    let (dir, _) = setup();
    let out = run(&["margin", "--polytope", "interval.json", "--A", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["result"]["margin"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(r["exit_code"], 0);
}

#[test]
fn infeasible_solve_exits_two() {
    let (dir, _) = setup();
    let out = run(&["solve-1d", "--polytope", "interval.json", "--A", "1+2.25*(3*x^2-1)"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["result"]["kind"], "Infeasible");
    assert!((r["result"]["min_w"].as_f64().unwrap() + 0.0625).abs() < 1e-9);
}

#[test]
fn functional_of_hinge() {
    let (dir, _) = setup();
    let out = run(
        &["functional", "--polytope", "interval.json", "--A", "1", "--u", "pl:max(0,x)"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!((report(&out)["result"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn reports_are_byte_identical() {
    let (dir, _) = setup();
    let args = [
        "destabilize", "--polytope", "interval.json", "--A", "1+6*x", "--mesh", "16", "--seeds", "1,2",
    ];
    let a = run(&args, dir.path());
    let b = run(&args, dir.path());
    assert_eq!(a.status.code(), Some(2));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn floats_carry_seventeen_digits() {
    let (dir, _) = setup();
    let out = run(&["functional", "--polytope", "interval.json", "--A", "1", "--u", "poly:x^2", "--which", "norm"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    // 8/45
    assert!(text.contains("0.17777777777777"), "{text}");
}

#[test]
fn rerun_from_report() {
    let (dir, _) = setup();
    let first = run(
        &["margin", "--polytope", "interval.json", "--A", "1+x^2", "--mesh", "1/16", "-o", "r1.json"],
        dir.path(),
    );
    assert_eq!(first.status.code(), Some(0));
    // the polytope is embedded, so the report stands alone
    std::fs::remove_file(dir.path().join("interval.json")).unwrap();
    let second = run(&["run", "--job", "r1.json", "-o", "r2.json"], dir.path());
    assert_eq!(second.status.code(), Some(0), "{}", String::from_utf8_lossy(&second.stderr));
    let r1: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r1.json")).unwrap()).unwrap();
    let r2: Value = serde_json::from_slice(&std::fs::read(dir.path().join("r2.json")).unwrap()).unwrap();
    assert_eq!(r1["job_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r1["result"], r2["result"]);
    assert_eq!(r1["headline"], r2["headline"]);
}

#[test]
fn kappa_sweep_changes_sign() {
    let (dir, _) = setup();
    let out = run(
        &[
            "sweep", "--param", "k", "--values", "0:8:0.5", "margin", "--polytope", "interval.json",
            "--A", "1+{k}*(3*x^2-1)/2", "--mesh", "32",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 17);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[4].parse().unwrap())).collect();
    assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1 + 1e-9));
    let first_neg = pts.iter().find(|p| p.1 < 0.0).unwrap().0;
    assert!(first_neg > 3.5 && first_neg <= 4.5, "{first_neg}");
    for r in &rows {
        assert_eq!(&r[1], "OK");
    }
}

#[test]
fn mesh_sweep_is_monotone() {
    let (dir, _) = setup();
    let out = run(
        &["sweep", "--param", "mesh", "--values", "16,32,64", "margin", "--polytope", "interval.json", "--A", "1+x^2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let m: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    // rows sorted by parameter value, i.e. by cell count here
    assert!(m.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{m:?}");
}

#[test]
fn sweep_marks_failed_rows() {
    let (dir, _) = setup();
    let out = run(
        &["sweep", "--param", "h", "--values", "-1,2", "truncate", "--polytope", "interval.json", "--u", "guillemin"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(&rows[0][1], "FAILED");
    assert_eq!(&rows[1][1], "OK");
}

#[test]
fn sweep_needs_one_template() {
    let (dir, _) = setup();
    let out = run(
        &["sweep", "--param", "k", "--values", "1,2", "margin", "--polytope", "interval.json", "--A", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_normal_names_field() {
    let (dir, _) = setup();
    std::fs::write(dir.path().join("bad.json"), r#"{"n":1,"facets":[{"a":[1.5],"lambda":-1},{"a":[-1],"lambda":-1}]}"#).unwrap();
    let out = run(&["margin", "--polytope", "bad.json", "--A", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("facets[0].a"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_option_is_an_error() {
    let (dir, _) = setup();
    let out = run(&["truncate", "--polytope", "interval.json", "--u", "guillemin"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("h"));
}

#[test]
fn csv_report_and_field_dump() {
    let (dir, _) = setup();
    let out = run(
        &[
            "abreu-residual", "--polytope", "interval.json", "--A", "1", "--cells", "32",
            "--dump-fields", "fields.csv", "--format", "csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows.iter().any(|r| &r[0] == "verdict"));
    let dump = std::fs::read_to_string(dir.path().join("fields.csv")).unwrap();
    assert!(dump.starts_with("xi1,S,A,residual,w,det_hessian"));
    assert!(csv_rows(&dump).len() > 20);
}

#[test]
fn quad_order_env_is_recorded() {
    let (dir, _) = setup();
    let out = bin()
        .args(["functional", "--polytope", "interval.json", "--A", "1", "--u", "poly:x^2"])
        .env("TORICSTAB_QUAD_ORDER", "20")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(report(&out)["job"]["quad_order"], 20);
    let bad = bin()
        .args(["functional", "--polytope", "interval.json", "--A", "1", "--u", "poly:x^2"])
        .env("TORICSTAB_QUAD_ORDER", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn solve_1d_writes_potential() {
    let (dir, _) = setup();
    let out = run(
        &[
            "solve-1d", "--polytope", "interval.json", "--A", "1+(3*x^2-1)", "--potential-out", "pot.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = run(
        &["abreu-residual", "--polytope", "interval.json", "--A", "1+(3*x^2-1)", "--u", "@pot.json"],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
}
