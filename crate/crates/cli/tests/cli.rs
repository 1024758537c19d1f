use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn simjudge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simjudge")).args(args).output().expect("binary runs")
}

fn spec(name: &str) -> String {
    data(&format!("specs/{name}")).display().to_string()
}

fn plan(name: &str) -> String {
    data(&format!("plans/{name}")).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("simjudge-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_reports_and_exits_by_validity() {
    let out = simjudge(&["validate", "--spec", &spec("heat_1d.md")]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);

    let dir = scratch("validate");
    let broken = dir.join("broken.md");
    let text = std::fs::read_to_string(spec("heat_1d.md")).unwrap();
    std::fs::write(&broken, text.replace("max_error: 1e-3 K", "max_error: small")).unwrap();
    let out = simjudge(&["validate", "--spec", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"][0]["rule"], "V2-tolerance");
}

#[test]
fn judge_exit_codes() {
    let stiff = spec("stiff_ode.md");
    let out = simjudge(&["judge", "--spec", &stiff, "--plan", &plan("stiff_rk4.json")]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rejected_condition"], "S3");

    let out = simjudge(&["judge", "--spec", &stiff, "--plan", &plan("stiff_rk4.json"), "--plan", &plan("stiff_bdf2.json")]);
    assert_eq!(out.status.code(), Some(0));

    let out = simjudge(&["judge", "--spec", &spec("hilbert_system.md"), "--plan", &plan("hilbert_direct.json")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn certify_is_reproducible_and_verify_catches_tampering() {
    let dir = scratch("certify");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for path in [&a, &b] {
        let out = simjudge(&[
            "certify",
            "--spec",
            &spec("heat_1d.md"),
            "--plan",
            &plan("heat_ftcs.json"),
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(simjudge(&["verify", "--certificate", a.to_str().unwrap()]).status.code(), Some(0));

    let mut tampered = bytes.clone();
    let at = bytes.len() / 2;
    tampered[at] ^= 0x01;
    let t = dir.join("tampered.json");
    std::fs::write(&t, tampered).unwrap();
    assert_eq!(simjudge(&["verify", "--certificate", t.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn certify_outcomes_map_to_exit_codes() {
    let out = simjudge(&["certify", "--spec", &spec("stiff_ode.md"), "--plan", &plan("stiff_rk4.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = simjudge(&["certify", "--spec", &spec("pitchfork.md"), "--plan", &plan("pitchfork_rk4.json")]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"], "flagged");
}

#[test]
fn solve_then_audit_round_trip() {
    let dir = scratch("solve");
    let out = simjudge(&["solve", "--spec", &spec("heat_1d.md"), "--plan", &plan("heat_ftcs.json"), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.join("solution.series");
    assert!(manifest.exists());
    let out = simjudge(&[
        "audit",
        "--spec",
        &spec("heat_1d.md"),
        "--plan",
        &plan("heat_ftcs.json"),
        "--solution",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["overall"], "pass");
}

#[test]
fn probe_builtin_problems() {
    let out = simjudge(&["probe", "--problem", "pitchfork", "--theta", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    let out = simjudge(&["probe", "--problem", "resonance", "--theta", "1.02", "--probe", "continuation"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(simjudge(&["probe", "--problem", "lorenz"]).status.code(), Some(1));
}

#[test]
fn missing_inputs_are_errors() {
    let out = simjudge(&["validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--spec"));
    let out = simjudge(&["plan", "--spec", &spec("heat_1d.md")]);
    assert_eq!(out.status.code(), Some(1));
}
