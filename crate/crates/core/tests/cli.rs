use std::path::Path;
use std::process::{Command, Output};

const SCENE: &str = r#"{"lambda": "0.2", "Phi": [["i*0.3"]], "grid": {"nx": 16, "ntheta": 16, "ns": 16, "nphi": 8}}"#;

fn magray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magray"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn trace_ends_on_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "s.json", SCENE);
    let out = magray(&["trace", "--scene", &scene, "--s", "1.0", "--phi", "-0.4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x,y,theta\n"));
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((last[1].hypot(last[2]) - 1.0).abs() < 1e-9);
}

#[test]
fn transform_output_feeds_adjoint() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "s.json", SCENE);
    let field = write(
        dir.path(),
        "f.json",
        r#"{"order": 1, "components": [["x"], ["1"]]}"#,
    );
    let data = dir.path().join("t.csv");
    let out = magray(&[
        "transform",
        "--scene",
        &scene,
        "--field",
        &field,
        "--order",
        "1",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(&data).unwrap().lines().count(),
        1 + 16 * 8
    );
    let out = magray(&[
        "adjoint",
        "--scene",
        &scene,
        "--data",
        data.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",f,0,"));
    // mismatched order is an infrastructure error
    let out = magray(&[
        "transform",
        "--scene",
        &scene,
        "--field",
        &field,
        "--order",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scatterdata_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "s.json", SCENE);
    let out = magray(&["scatterdata", "--scene", &scene]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 16 * 8);
    let c = &rows[0]["c"][0][0];
    let modulus = c[0].as_f64().unwrap().hypot(c[1].as_f64().unwrap());
    assert!((modulus - 1.0).abs() < 1e-8);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "s.json", SCENE);
    let report = dir.path().join("r.json");
    let out = magray(&[
        "verify",
        "--scene",
        &scene,
        "--checks",
        "euclidean,fiber",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("r.csv").exists());

    let out = magray(&["verify", "--scene", &scene, "--checks", ""]);
    assert_eq!(out.status.code(), Some(0));

    let missing = dir.path().join("missing.json");
    let out = magray(&["verify", "--scene", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = magray(&["verify", "--scene", &scene, "--checks", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_reports_check_failures() {
    let dir = tempfile::tempdir().unwrap();
    // a 16-point grid cannot resolve the commutator to its tolerance
    let scene = write(
        dir.path(),
        "s.json",
        r#"{"lambda": "0.3", "grid": {"nx": 16, "ntheta": 16, "ns": 16, "nphi": 8}}"#,
    );
    let out = magray(&["verify", "--scene", &scene, "--checks", "commutator"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn non_simple_scenes_skip_gated_checks() {
    // strong curvature traps curves: the gated check is skipped, not failed
    let dir = tempfile::tempdir().unwrap();
    let scene = write(
        dir.path(),
        "s.json",
        r#"{"lambda": "2", "grid": {"nx": 16, "ntheta": 16, "ns": 16, "nphi": 8}}"#,
    );
    let out = magray(&["verify", "--scene", &scene, "--checks", "transport"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("SKIPPED"));
}
