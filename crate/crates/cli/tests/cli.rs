use std::path::Path;
use std::process::{Command, Output};

use gapsafe_cli::validate_trace;
use serde_json::Value;

fn gapsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapsafe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_trace(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    validate_trace(&v).unwrap();
    v
}

fn solve(dir: &Path, name: &str, extra: &[&str]) -> (Output, Value) {
    let out = dir.join(name);
    let mut args = vec!["solve", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = gapsafe(&args);
    let v = read_trace(&out);
    (o, v)
}

#[test]
fn solve_at_lambda_max_stops_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    for (loss, data) in [
        ("quadratic", "synth:gaussian:30x80"),
        ("logistic", "synth:binary:30x80"),
        ("kl", "synth:count:30x80"),
    ] {
        let (o, v) = solve(
            dir.path(),
            "t.json",
            &["--loss", loss, "--data", data, "--lambda-rel", "1.0", "--dump-x"],
        );
        assert!(o.status.success(), "{loss}: {}", String::from_utf8_lossy(&o.stderr));
        let fin = &v["final"];
        assert!(fin["iterations"].as_u64().unwrap() <= 2, "{loss}");
        assert!(fin["x"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
        assert_eq!(fin["x_nnz"], 0);
    }
}

#[test]
fn dgs_is_rejected_for_kl() {
    let o = gapsafe(&[
        "solve", "--loss", "kl", "--data", "synth:count:20x40", "--lambda-rel", "0.1", "--algorithm", "dgs",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("global strong concavity unavailable for this loss"), "{err}");
}

#[test]
fn bad_configs_exit_2() {
    for args in [
        vec!["solve", "--loss", "beta15", "--data", "synth:pixel_mix:20x40", "--lambda-rel", "0.1", "--solver", "cd"],
        vec!["solve", "--loss", "quadratic", "--data", "synth:gaussian:20x40", "--lambda-rel", "1.5"],
        vec!["solve", "--loss", "quadratic", "--data", "/nonexistent/file.svm", "--lambda-rel", "0.5"],
        vec!["solve", "--loss", "beta15", "--data", "synth:pixel_mix:20x40", "--lambda-rel", "0.1", "--solver", "mu", "--epsilon", "0.5"],
    ] {
        let o = gapsafe(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn baseline_and_gdgs_reach_the_same_objective() {
    let dir = tempfile::tempdir().unwrap();
    for (loss, data, solver) in [
        ("kl", "synth:count:40x200", "cd"),
        ("quadratic", "synth:gaussian:40x200", "cd"),
        ("beta15", "synth:pixel_mix:40x200", "pg"),
    ] {
        let common = ["--loss", loss, "--data", data, "--solver", solver, "--lambda-rel", "0.1", "--seed", "7"];
        let mut a = common.to_vec();
        a.extend(["--algorithm", "none"]);
        let (oa, va) = solve(dir.path(), "a.json", &a);
        let mut b = common.to_vec();
        b.extend(["--algorithm", "gdgs"]);
        let (ob, vb) = solve(dir.path(), "b.json", &b);
        assert!(oa.status.success() && ob.status.success(), "{loss}");
        let pa = va["final"]["objective"].as_f64().unwrap();
        let pb = vb["final"]["objective"].as_f64().unwrap();
        assert!((pa - pb).abs() <= 1e-6, "{loss}: {pa} vs {pb}");
    }
}

#[test]
fn summary_line_matches_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (o, v) = solve(
        dir.path(),
        "t.json",
        &["--loss", "kl", "--data", "synth:count:40x200", "--lambda-rel", "0.05", "--algorithm", "rdgs"],
    );
    assert!(o.status.success());
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.starts_with("loss=kl algo=rdgs iters="), "{line}");
    let screened = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("screened="))
        .unwrap();
    let (s, n) = screened.split_once('/').unwrap();
    let (s, n): (u64, u64) = (s.parse().unwrap(), n.parse().unwrap());
    assert_eq!(n, 200);
    assert_eq!(s, n - v["final"]["active"].as_u64().unwrap());
    let last = v["iterations"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["active"], v["final"]["active"]);
    assert!(line.contains("time_s="));
}

#[test]
fn non_convergence_exits_3_and_still_writes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (o, v) = solve(
        dir.path(),
        "t.json",
        &[
            "--loss", "kl", "--data", "synth:count:40x200", "--lambda-rel", "0.01", "--solver", "mu", "--max-iter", "5",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(v["final"]["converged"], false);
    assert_eq!(v["iterations"].as_array().unwrap().len(), 5);
    assert_eq!(v["config"]["x0"].as_f64(), Some(1e-16));
}

#[test]
fn baseline_trace_has_null_radius() {
    let dir = tempfile::tempdir().unwrap();
    let (_, v) = solve(
        dir.path(),
        "t.json",
        &["--loss", "quadratic", "--data", "synth:gaussian:20x50", "--lambda-rel", "0.3", "--algorithm", "none"],
    );
    assert!(v["iterations"][0]["radius"].is_null());
    assert!(v["iterations"][0]["alpha"].is_null());
}

#[test]
fn solves_from_a_libsvm_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.svm");
    std::fs::write(&data, "1 1:1 2:0.5\n-1 2:1 3:0.2\n1 1:0.3 3:1\n-1 1:0.1 2:0.9\n").unwrap();
    let (o, v) = solve(
        dir.path(),
        "t.json",
        &["--loss", "logistic", "--data", data.to_str().unwrap(), "--lambda-rel", "0.5", "--algorithm", "dgs"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(v["config"]["m"], 4);
    assert_eq!(v["config"]["n"], 3);
}

fn path_rows(args: &[&str]) -> Vec<Vec<String>> {
    let mut full = vec!["path"];
    full.extend_from_slice(args);
    let o = gapsafe(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, gapsafe_cli::PATH_HEADER);
    rd.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn path_report_properties() {
    let rows = path_rows(&[
        "--loss", "quadratic", "--data", "synth:gaussian:30x150", "--lambda-grid", "1e-1:2:3log", "--jobs", "3",
    ]);
    assert_eq!(rows.len(), 3 * 4);
    for r in &rows {
        let lam: f64 = r[0].parse().unwrap();
        if r[1] == "none" {
            assert_eq!(r[6], "1.000000");
        } else if lam >= 1.0 {
            assert_eq!(r[5].parse::<f64>().unwrap(), 1.0);
        }
    }
    for lam in ["2", "0.1"] {
        let get = |algo: &str| rows.iter().find(|r| r[0] == lam && r[1] == algo).unwrap().clone();
        let (d, g) = (get("dgs"), get("gdgs"));
        assert_eq!(d[3], g[3]);
        assert_eq!(d[5], g[5]);
    }
}

#[test]
fn path_marks_failed_cells() {
    let o = gapsafe(&[
        "path", "--loss", "kl", "--data", "synth:count:30x100", "--solver", "mu", "--max-iter", "3",
        "--lambda-grid", "1e-2:1e-1:2log", "--algorithm", "gdgs",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(1).any(|l| l.contains("NA")), "{text}");
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn path_is_deterministic_in_counts() {
    let args = [
        "--loss", "kl", "--data", "synth:count:30x120", "--lambda-grid", "1e-2:1e-1:2log", "--algorithm", "rdgs",
    ];
    let strip = |rows: Vec<Vec<String>>| -> Vec<(String, String, String)> {
        rows.into_iter().map(|r| (r[0].clone(), r[3].clone(), r[5].clone())).collect()
    };
    let mut a = args.to_vec();
    a.extend(["--jobs", "1"]);
    let mut b = args.to_vec();
    b.extend(["--jobs", "4"]);
    assert_eq!(strip(path_rows(&a)), strip(path_rows(&b)));
}
