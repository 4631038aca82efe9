//! End-to-end runs of the `lumpmg` binary: outputs, manifests and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lumpmg::harness::run::read_rows_csv;
use lumpmg::harness::{Manifest, ResultRow};

fn lumpmg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumpmg"))
        .args(args)
        .env_remove("LUMPMG_SEED")
        .output()
        .expect("spawn lumpmg")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<ResultRow> {
    read_rows_csv(fs::File::open(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "problem": {"example": 1, "tau": [1, 1e-4], "level": [3, 4]},
  "method": [{"solver": "mg", "smoother": "cgs"}, {"solver": "gmres", "precond": "B", "smoother": "dgs"}],
  "run": {"seeds": [0, 1]}
}"#;

#[test]
fn solve_writes_csv_and_manifest_that_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL);
    let out1 = tmp.path().join("run1");
    let o = lumpmg(&["solve", &cfg, "--out", out1.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = rows(&out1.join("results.csv"));
    assert_eq!(first.len(), 2 * 2 * 2 * 2);
    assert!(first.iter().all(|r| r.converged));
    assert_eq!(first[0].method, "mg/cgs");
    assert_eq!(first[8].method, "gmres/dgs");
    let header = fs::read_to_string(out1.join("results.csv")).unwrap();
    assert!(header.starts_with("example,bc,h,tau,method,precond,cycle,pre,post,seed,iters,converged,conv_factor,wall_ms\n"));

    let manifest_path = out1.join("manifest.json");
    let manifest = Manifest::read(&manifest_path).unwrap();
    assert_eq!(manifest.rows, first.len());
    assert_eq!(manifest.lumpmg_version, env!("CARGO_PKG_VERSION"));

    // the manifest itself is a valid input and reproduces every row
    let out2 = tmp.path().join("run2");
    let o = lumpmg(&["solve", manifest_path.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let second = rows(&out2.join("results.csv"));
    let strip = |v: &[ResultRow]| v.iter().map(ResultRow::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn solve_to_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "one.json",
        r#"{"problem": {"example": 2, "tau": 1e-4, "level": 3}, "method": {"solver": "mg"}, "run": {"seeds": [4]}}"#,
    );
    let o = lumpmg(&["solve", &cfg]);
    assert!(o.status.success());
    let rows = read_rows_csv(&o.stdout[..]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].seed, 4);
}

#[test]
fn seed_override_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "env.json",
        r#"{"problem": {"example": 1, "tau": 1, "level": 2}, "method": {"solver": "mg"}}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_lumpmg"))
        .args(["solve", &cfg])
        .env("LUMPMG_SEED", "17")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows_csv(&o.stdout[..]).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![17]);
    let o = lumpmg(&["solve", &cfg]);
    assert_eq!(read_rows_csv(&o.stdout[..]).unwrap().len(), 5);
}

#[test]
fn bad_configs_exit_2_with_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"problem": {"example": 1, "tau": 0, "level": 3}, "method": {"solver": "mg"}}"#, "problem.tau"),
        (r#"{"problem": {"example": 1, "tau": 1, "level": 3}, "method": {"solver": "mg", "precond": "B"}}"#, "method.precond"),
        (r#"{"problem": {"example": 1, "tau": 1, "level": 3}, "method": {"solver": "gmres", "precond": "Bd", "inner": "mg"}}"#, "inner"),
        (r#"{"problem": {"example": 1, "tau": 1, "level": 3}, "method": {"solver": "mg", "cycles": "w"}}"#, "cycles"),
        (r#"{"problem": {"example": 3, "tau": 1, "level": 3}, "method": {"solver": "mg"}}"#, "example"),
        (r#"{"problem": {"example": 1, "tau": 1, "level": 12}, "method": {"solver": "mg"}}"#, "problem.level"),
        ("not json", "json"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), text);
        let o = lumpmg(&["solve", &cfg]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "case {i}: {}", stderr(&o));
    }
    let o = lumpmg(&["solve", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table_subset_and_unknown_id() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = lumpmg(&[
        "table", "1", "--levels", "6", "--rows", "CGS-MG", "--seeds", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("8/8 cells within tolerance"), "{text}");
    let csv = fs::read_to_string(out.join("table_1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,CGS-MG,0.015625,1e0,8,8,"));
    assert_eq!(rows(&out.join("table_1_runs.csv")).len(), 8);
    assert!(out.join("table_1.json").exists());

    let o = lumpmg(&["table", "11"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown table"));
    let o = lumpmg(&["table", "1", "--levels", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suites_and_exit_codes() {
    let o = lumpmg(&["verify", "smw"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("20/20"), "{text}");
    let o = lumpmg(&["verify", "lemmas"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l.starts_with("PASS")));
    let o = lumpmg(&["verify", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_and_mesh_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "spec.json",
        r#"{"problem": {"example": "custom", "coefficients": {"a": 1, "b": 1}, "tau": 1e-3, "level": 2},
            "precond": ["B", "Btilde"]}"#,
    );
    let out = tmp.path().join("s");
    let o = lumpmg(&["spectrum", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("re,im,h,tau,precond\n"));
    assert!(csv.lines().any(|l| l.ends_with(",Btilde")));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("spectrum_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    let bad = write(tmp.path(), "bad.json", r#"{"problem": {"example": 1, "tau": 1, "level": 2}, "precond": "C"}"#);
    assert_eq!(lumpmg(&["spectrum", &bad]).status.code(), Some(2));

    let o = lumpmg(&["mesh-dump", "2", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v = fs::read_to_string(tmp.path().join("vertices_l2.csv")).unwrap();
    let t = fs::read_to_string(tmp.path().join("triangles_l2.csv")).unwrap();
    assert_eq!(t.lines().count() - 1, 6 * 16);
    assert_eq!(v.lines().count() - 1, 65);
    assert!(tmp.path().join("boundary_l2.csv").exists());
    assert_eq!(lumpmg(&["mesh-dump", "11"]).status.code(), Some(2));
}
