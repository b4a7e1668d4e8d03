use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hecke-sl2"));
    c.env("HECKE_SL2_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn verify_writes_a_passing_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let out = run(&["verify", "--p", "3", "--deg", "1", "--r", "1", "--levels", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("PASS"));
    let cert = json_file(&path);
    assert_eq!(cert["dim_b"], 2186);
    for c in ["c1", "c2", "c3", "c4"] {
        assert_eq!(cert[c]["passed"], true, "{c}");
    }
    assert_eq!(cert["basis"]["a_sizes"], serde_json::json!([2, 22, 192, 1728]));
}

#[test]
fn image_of_f0_is_f_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for (args, file) in [
        (vec!["fn", "--p", "3", "--r", "2", "--n", "0"], "f0.json"),
        (vec!["fn", "--p", "3", "--r", "2", "--n", "-1"], "fm1.json"),
    ] {
        let mut a = args.clone();
        let path = p(file);
        a.extend(["--out", &path]);
        assert_eq!(run(&a).status.code(), Some(0));
    }
    let out = run(&["tau-apply", "--in", &p("f0.json"), "--out", &p("image.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_file(&dir.path().join("image.json")), json_file(&dir.path().join("fm1.json")));
}

#[test]
fn tau_apply_reads_stdin() {
    let f0 = run(&["fn", "--p", "2", "--r", "1", "--n", "0"]);
    let mut child = bin()
        .args(["tau-apply", "--in", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(&f0.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let image: Value = serde_json::from_slice(&out.stdout).unwrap();
    let want: Value = serde_json::from_slice(&run(&["fn", "--p", "2", "--r", "1", "--n", "-1"]).stdout).unwrap();
    assert_eq!(image, want);
}

#[test]
fn parameter_errors_exit_two_with_reason() {
    let out = run(&["verify", "--p", "4", "--r", "1", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["reason"], "invalid_parameter");

    let out = run(&["verify", "--p", "3", "--r", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["verify", "--p", "3", "--r", "1", "--levels", "2", "--precision", "9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["reason"], "usage");

    let out = bin().args(["field-info", "--p", "2"]).env("HECKE_SL2_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"schema\": 1}").unwrap();
    let out = run(&["engine-check", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["reason"], "parse_error");
}

#[test]
fn engine_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let cert = dir.path().join("cert.json");
    let out = run(&[
        "free-basis",
        "--p",
        "2",
        "--r",
        "1",
        "--levels",
        "2",
        "--out",
        cert.to_str().unwrap(),
        "--instance-out",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["engine-check", "--in", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["h4"]["passed"], true);
    let out = run(&["engine-build", "--in", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let built: Value = serde_json::from_slice(&out.stdout).unwrap();
    let sizes: Vec<u64> =
        built["a_sets"].as_array().unwrap().iter().map(|e| e[1].as_array().unwrap().len() as u64).collect();
    assert_eq!(
        sizes,
        json_file(&cert)["basis"]["a_sizes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect::<Vec<_>>()
    );
}

#[test]
fn engine_fuzz_reports_every_seed() {
    for d in ["1", "2"] {
        let out = run(&["engine-fuzz", "--d", d, "--count", "20", "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["passed"], 20);
        assert_eq!(v["runs"].as_array().unwrap().len(), 20);
    }
}

#[test]
fn small_commands() {
    let v: Value = serde_json::from_slice(&run(&["field-info", "--p", "2", "--deg", "2"]).stdout).unwrap();
    assert_eq!(v["q"], 4);
    assert_eq!(v["modulus"], serde_json::json!([1, 1, 1]));
    let out = run(&["weight-info", "--p", "3", "--deg", "2", "--r", "2,1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dim"], 6);
    let out = run(&["tau-table", "--p", "3", "--r", "0", "--levels", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}
