use std::path::Path;
use std::process::{Command, Output, Stdio};

use std::io::Write;

fn thinbasis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinbasis")).args(args).output().expect("run thinbasis")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).expect("utf-8")
}

fn golden() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/verify-k2s9-seed42"))
}

#[test]
fn constants_k14_reports_thresholds() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&thinbasis(&["constants", "--k", "14"]))).unwrap();
    assert_eq!(v["k"], 14);
    assert!(v["tau"].as_f64().unwrap() > 0.0);
    assert!(v["g0"].as_f64().unwrap() > 56.0);
    let report = v["inequality_report"].as_array().unwrap();
    assert!(!report.is_empty());
    assert!(report.iter().all(|c| c["pass"] == true));
    assert!(v["delta_star"].as_f64().unwrap() < 0.0);
}

#[test]
fn verify_matches_golden_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = thinbasis(&["verify", "--preset", "k2s9-thm13", "--seed", "42", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = String::from_utf8_lossy(&out.stderr);
    assert_eq!(summary.lines().count(), 1, "{summary}");
    for name in ["records.csv", "report.json"] {
        assert_eq!(std::fs::read(dir.join(name)).unwrap(), std::fs::read(golden().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let text = std::fs::read_to_string(golden().join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, report["config"].to_string()).unwrap();
    let dir = tmp.path().join("out");
    let out = thinbasis(&["verify", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(dir.join("report.json")).unwrap(), text.as_bytes());
}

#[test]
fn json_format_inlines_records() {
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&thinbasis(&["verify", "--preset", "k2s9-thm13", "--format", "json"]))).unwrap();
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 14);
    for r in records {
        let parts: i64 = ["r_plus", "r_zero", "r_eq"].iter().map(|k| r[k].as_i64().unwrap()).sum();
        assert_eq!(parts, r["r_s"].as_i64().unwrap());
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    for body in [
        r#"{"schema": 1, "bogus": true}"#,
        r#"{"schema": 2}"#,
        r#"not json"#,
    ] {
        let cfg = tmp.path().join("bad.json");
        std::fs::write(&cfg, body).unwrap();
        let out = thinbasis(&["verify", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!dir.exists());
    }
    let out = thinbasis(&["sample-basis", "--preset", "no-such-preset"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_errors_exit_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_thinbasis"))
        .args(["repcount", "--k", "2", "--s", "9", "--n", "100000", "--R", "100"])
        .env("THINBASIS_MEMORY_BUDGET", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn sample_basis_outputs_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    stdout(&thinbasis(&["sample-basis", "--preset", "k2s9-thm13", "--seed", "3", "--out-dir", dir]));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("sample.json")).unwrap()).unwrap();
    let csv = std::fs::read_to_string(tmp.path().join("members.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len() as u64, summary["members"].as_u64().unwrap());
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let x: u64 = f[0].parse().unwrap();
        assert_eq!(f[1].parse::<u64>().unwrap(), x * x);
        let p: f64 = f[2].parse().unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
    let inline: serde_json::Value =
        serde_json::from_str(&stdout(&thinbasis(&["sample-basis", "--preset", "k2s9-thm13", "--seed", "3"]))).unwrap();
    assert_eq!(inline["members"], summary["members"]);
    assert_eq!(inline["xs"].as_array().unwrap().len() as u64, summary["members"].as_u64().unwrap());
}

#[test]
fn repcount_rows() {
    let out = stdout(&thinbasis(&["repcount", "--k", "2", "--s", "5", "--n", "5", "--R", "5"]));
    assert_eq!(out, "n,weighted,count\n5,1.0,1\n");
    let out = stdout(&thinbasis(&["repcount", "--k", "2", "--s", "3", "--n-range", "0..4", "--R", "10"]));
    assert_eq!(out, "n,weighted,count\n0,0.0,0\n1,0.0,0\n2,0.0,0\n3,1.0,1\n4,0.0,0\n");
    let out = thinbasis(&["repcount", "--k", "2", "--s", "3", "--n-range", "4..1", "--R", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_reports_route_and_diagnostics() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&thinbasis(&[
        "singular", "--n", "7", "--k", "2", "--s", "9", "--route", "euler",
    ])))
    .unwrap();
    assert_eq!(v["n"], 7);
    assert_eq!(v["route"]["route"], "euler");
    assert_eq!(v["diagnostics"]["converged"], true);
    let q: serde_json::Value =
        serde_json::from_str(&stdout(&thinbasis(&["singular", "--n", "7", "--k", "2", "--s", "9", "--Q", "300"]))).unwrap();
    assert!((q["value"].as_f64().unwrap() - v["value"].as_f64().unwrap()).abs() < 1e-3);
}

#[test]
fn arcs_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_thinbasis"))
        .args(["arcs", "--input", "-", "--k", "2", "--P", "100", "--Q", "10"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0.5\n# skipped\n\n0.1234567\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(stdout(&out), "alpha,label,a,q,err\n0.5,major,1,2,0.0\n0.1234567,minor,,,\n");
}

#[test]
fn weylsum_and_smooth_csv() {
    let out = stdout(&thinbasis(&["weylsum", "--k", "2", "--s", "9", "--P", "30", "--alpha-grid", "8", "--variant", "full"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 9);
    // α = 0 sums the unit weights of 𝒜(30, 30).
    assert_eq!(lines[1], "0.0,30.0,0.0,30.0");

    let tmp = tempfile::tempdir().unwrap();
    let members = tmp.path().join("m.csv");
    let out = stdout(&thinbasis(&["smooth", "--P", "100", "--R", "5", "--members", members.to_str().unwrap()]));
    let count: usize = out.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(count, 34);
    assert_eq!(std::fs::read_to_string(&members).unwrap().lines().count(), count + 1);
}

#[test]
fn moments_exact_and_quadrature() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&thinbasis(&[
        "moments", "--k", "2", "--s", "5", "--P", "40", "--t", "4", "--w", "2",
    ])))
    .unwrap();
    let quad = v["quad"]["value"].as_f64().unwrap();
    let exact = v["exact_even"]["value"].as_f64().unwrap();
    assert!((quad - exact).abs() <= 1e-9 * exact);
    let out = thinbasis(&["moments", "--k", "2", "--s", "5", "--P", "40", "--t", "4", "--arcs", "minor"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_files_replace_atomically() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.json");
    std::fs::write(&path, "stale").unwrap();
    stdout(&thinbasis(&["constants", "--k", "5", "--out", path.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["k"], 5);
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);
}
