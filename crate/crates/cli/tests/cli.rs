use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arxmpc::afti16;
use serde_json::Value;
use tempfile::TempDir;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/afti16").join(name)
}

fn arxmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arxmpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Temp dir holding the shipped model and config plus short scenarios.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["model.json", "mpc.json"] {
        std::fs::copy(shipped(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn write_scenario(dir: &Path, name: &str, body: &str, steps: usize, noise: &str) -> PathBuf {
    let text = format!(
        r#"{{"name": "{name}", "model": "model.json", "config": "mpc.json", {body}
            "noise": {noise}, "steps": {steps},
            "reference": {{"r2_step": {{"level": 10.0, "fall_at": 100}}}}}}"#
    );
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, text).unwrap();
    path
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

#[test]
fn discretize_matches_library_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let res = arxmpc(&["discretize", "--model", p(&shipped("model.json")), "--out", p(&out)]);
    assert_eq!(code(&res), 0);
    let v = read_json(&out);
    assert_eq!(v["continuous"], Value::Bool(false));
    let dss = afti16::discrete_model();
    for (key, want) in [("A", dss.a()), ("B", dss.b()), ("C", dss.c())] {
        let got = matrix(&v[key]);
        for (i, row) in got.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let w = want[(i, j)];
                assert!((x - w).abs() <= 1e-8 * (1.0 + w.abs()), "{key}[{i}][{j}]");
            }
        }
    }
}

#[test]
fn discretize_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.json");
    let m = shipped("model.json");
    assert_eq!(code(&arxmpc(&["discretize", "--model", p(&m), "--out", p(&d)])), 0);
    let again = arxmpc(&["discretize", "--model", p(&d), "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(code(&again), 2);
    assert!(String::from_utf8_lossy(&again.stderr).contains("already a discrete model"));
    for dt in ["0", "-1"] {
        let res = arxmpc(&["discretize", "--model", p(&m), "--dt", dt, "--out", p(&d)]);
        assert_eq!(code(&res), 2, "dt = {dt}");
    }
    let missing = arxmpc(&["discretize", "--model", "/no/such/file.json", "--out", p(&d)]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn transform_ch_gives_published_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ch.json");
    let res = arxmpc(&["transform", "--model", p(&shipped("model.json")), "--method", "ch", "--out", p(&out)]);
    assert_eq!(code(&res), 0);
    assert!(stdout(&res).contains("order: 4"));
    let v = read_json(&out);
    assert_eq!(v["p"], 4);
    let printed = [3.9944, -5.8834, 3.7837, -0.8947];
    for (i, &c) in printed.iter().enumerate() {
        let a = matrix(&v["A_bar"][i]);
        assert!((a[0][0] - c).abs() <= 1e-4 && (a[1][1] - c).abs() <= 1e-4, "A_bar[{i}]");
        assert_eq!(a[0][1], 0.0);
        assert_eq!(a[1][0], 0.0);
    }
}

#[test]
fn transform_ot_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ot.json");
    let m = shipped("model.json");
    for (poles, order) in [("0.01,0.02,0.03,0.04", 4), ("0.04,0.08,0.12,0.16", 6)] {
        let res = arxmpc(&["transform", "--model", p(&m), "--method", "ot", "--poles", poles, "--out", p(&out)]);
        assert_eq!(code(&res), 0);
        assert!(stdout(&res).contains(&format!("order: {order}\n")), "{}", stdout(&res));
        assert!(stdout(&res).contains("truncation norm: "));
        assert_eq!(read_json(&out)["p"], order);
    }
}

#[test]
fn transform_flag_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let m = shipped("model.json");
    let cases: &[&[&str]] = &[
        &["--method", "ot"],
        &["--method", "kf", "--q", "0.05"],
        &["--method", "ch", "--poles", "0.1,0.2,0.3,0.4"],
        &["--method", "ot", "--poles", "0.1,0.2,0.3,0.4", "--q", "1"],
        &["--method", "ot", "--poles", "0.1,0.2,0.3,0.4", "--tol", "0"],
        &["--method", "nope"],
        &["--method", "ot", "--poles", "0.1,0.2"],
    ];
    for extra in cases {
        let mut args = vec!["transform", "--model", p(&m), "--out", p(&out)];
        args.extend_from_slice(extra);
        assert_eq!(code(&arxmpc(&args)), 2, "{extra:?}");
    }
    assert!(!out.exists());
}

#[test]
fn transform_numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let m = shipped("model.json");
    // The Kalman error dynamics decay too slowly for the default order cap.
    let kf = arxmpc(&["transform", "--model", p(&m), "--method", "kf", "--q", "0.05", "--r", "0.05", "--out", p(&out)]);
    assert_eq!(code(&kf), 3);
    let fixed = arxmpc(&[
        "transform", "--model", p(&m), "--method", "kf", "--q", "0.05", "--r", "0.05", "--order", "12", "--out", p(&out),
    ]);
    assert_eq!(code(&fixed), 0);
    assert_eq!(read_json(&out)["p"], 12);
}

#[test]
fn transform_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let m = shipped("model.json");
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let res = arxmpc(&["transform", "--model", p(&m), "--method", "ot", "--poles", "0.04,0.08,0.12,0.16", "--out", p(&out)]);
        assert_eq!(code(&res), 0);
        outputs.push((std::fs::read(&out).unwrap(), res.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_noise_free_ch_matches_ss() {
    let dir = workspace();
    let free = r#"{"q": 0.0, "r": 0.0, "seed": 0}"#;
    let mut costs = Vec::new();
    for (name, controller) in [("ss", "ss-kf"), ("ch", "arx-ch")] {
        let s = write_scenario(dir.path(), name, &format!(r#""controller": "{controller}","#), 60, free);
        let out = dir.path().join(format!("out_{name}"));
        assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&s), "--out-dir", p(&out)])), 0);
        let summary = read_json(&out.join("summary.json"));
        assert_eq!(summary["steps_completed"], 60);
        assert_eq!(summary["diverged"], Value::Bool(false));
        costs.push(summary["avg_tracking_cost"].as_f64().unwrap());
        let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
        assert!(csv.starts_with("step,y1,y2,r2,u1,u2,du1,du2,per_step_cost\n"));
        assert_eq!(csv.lines().count(), 61);
    }
    assert!((costs[0] - costs[1]).abs() <= 1e-6 * costs[0]);
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = workspace();
    let s = write_scenario(
        dir.path(),
        "ot",
        r#""controller": "arx-ot", "poles": [0.04, 0.08, 0.12, 0.16],"#,
        40,
        r#"{"q": 0.01, "r": 0.01, "seed": 42}"#,
    );
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&s), "--out-dir", p(&out)])), 0);
        files.push((
            std::fs::read(out.join("trajectory.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn simulate_reports_divergence_with_exit_0() {
    let dir = workspace();
    let s = write_scenario(dir.path(), "ch", r#""controller": "arx-ch","#, 200, r#"{"q": 0.05, "r": 0.05, "seed": 42}"#);
    let out = dir.path().join("out");
    assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&s), "--out-dir", p(&out)])), 0);
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["diverged"], Value::Bool(true));
    assert!(summary["steps_completed"].as_u64().unwrap() < 200);
}

#[test]
fn simulate_input_errors_exit_2() {
    let dir = workspace();
    let out = dir.path().join("out");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&bad), "--out-dir", p(&out)])), 2);
    let no_poles = write_scenario(dir.path(), "ot", r#""controller": "arx-ot","#, 10, r#"{"q": 0.0, "r": 0.0, "seed": 0}"#);
    assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&no_poles), "--out-dir", p(&out)])), 2);
    let unknown = write_scenario(dir.path(), "x", r#""controller": "pid","#, 10, r#"{"q": 0.0, "r": 0.0, "seed": 0}"#);
    assert_eq!(code(&arxmpc(&["simulate", "--scenario", p(&unknown), "--out-dir", p(&out)])), 2);
    assert!(!out.exists());
}

#[test]
fn compare_ranks_and_renders_divergence() {
    let dir = workspace();
    let noise = r#"{"q": 0.05, "r": 0.05, "seed": 0}"#;
    let ss = write_scenario(dir.path(), "ss", r#""controller": "ss-kf","#, 80, noise);
    let ch = write_scenario(dir.path(), "ch", r#""controller": "arx-ch","#, 80, noise);
    let out = dir.path().join("report.json");
    let res = arxmpc(&["compare", p(&ss), p(&ch), "--seeds", "1,2", "--out", p(&out)]);
    assert_eq!(code(&res), 0);
    let table = stdout(&res);
    assert!(table.contains("diverged"), "{table}");
    assert!(table.contains("ss < ch"), "{table}");
    let report = read_json(&out);
    assert_eq!(report["seeds"], serde_json::json!([1, 2]));
    assert_eq!(report["controllers"].as_array().unwrap().len(), 2);

    let again = dir.path().join("again.json");
    let res2 = arxmpc(&["compare", p(&ss), p(&ch), "--seeds", "1-2", "--out", p(&again)]);
    assert_eq!(res2.stdout, res.stdout);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn compare_usage_errors_exit_2() {
    let dir = workspace();
    let ss = write_scenario(dir.path(), "ss", r#""controller": "ss-kf","#, 10, r#"{"q": 0.0, "r": 0.0, "seed": 0}"#);
    let out = dir.path().join("r.json");
    assert_eq!(code(&arxmpc(&["compare", p(&ss), "--seeds", "1", "--out", p(&out)])), 2);
    assert_eq!(code(&arxmpc(&["compare", p(&ss), p(&ss), "--seeds", "3-1", "--out", p(&out)])), 2);
    assert_eq!(code(&arxmpc(&["compare", p(&ss), p(&ss), "--out", p(&out)])), 2);
    assert_eq!(code(&arxmpc(&[])), 2);
}
