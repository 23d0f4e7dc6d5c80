use std::path::Path;
use std::process::{Command, Output};

fn cfx(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfx"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn simulate_c(dir: &Path) {
    let o = cfx(&["simulate", "--structure", "C", "--n", "1500", "--seed", "3", "--out", "c.csv"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_requested_shape_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfx(
        &["simulate", "--eight-var", "--noise", "gaussian", "--n", "300", "--out", "d/e.csv", "--spec-out", "e.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("d/e.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 301);
    assert_eq!(lines[0].split(',').count(), 8);
    assert!(json(&dir.path().join("e.json")).is_object());
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        cfx(&["simulate", "--structure", "B", "--n", "200", "--seed", "9", "--out", out], dir.path());
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    let cases: &[&[&str]] = &[
        &["simulate", "--out", "x.csv"],
        &["simulate", "--structure", "Q", "--out", "x.csv"],
        &["explain", "--data", "c.csv", "--target", "nope", "--no-graph", "--out-json", "r.json"],
        &["explain", "--data", "c.csv", "--target", "Y", "--method", "resit", "--prior", "b", "--out-json", "r.json"],
        &["discover", "--data", "c.csv", "--target", "Y", "--method", "magic", "--out", "g.json"],
        &["--jobs", "0", "simulate", "--structure", "A", "--out", "x.csv"],
        &["bogus-command"],
    ];
    for args in cases {
        assert_eq!(code(&cfx(args, dir.path())), 2, "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfx(&["discover", "--data", "missing.csv", "--target", "Y", "--method", "pc", "--out", "g.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cfx(&["--help"], dir.path())), 0);
}

#[test]
fn no_graph_report_is_flagged_conditional() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--no-graph", "--out-json", "r.json", "--out-csv", "r.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("r.json"));
    assert!(r["graph"].is_null());
    for v in r["variables"].as_array().unwrap() {
        assert_eq!(v["rule"], "conditional");
    }
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("variable,x,x_prime,nec,suf,nesuf,clamped,max_nesuf\n"));
}

#[test]
fn discovery_then_explain_against_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    let o = cfx(
        &["discover", "--data", "c.csv", "--target", "Y", "--method", "lingam", "--prior", "b", "--out", "g.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let g = json(&dir.path().join("g.json"));
    let y = 2;
    assert!(g["directed"].as_array().unwrap().iter().all(|e| e[0] != y));
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--graph", "g.json", "--out-json", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("r.json"))["variables"].as_array().unwrap().len(), 2);
}

#[test]
fn pc_pattern_yields_one_report_per_extension() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--method", "pc", "--out-json", "r.json", "--out-csv", "r.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("r.json"));
    let n = r.as_array().map_or(1, Vec::len);
    if n > 1 {
        assert!(dir.path().join("r.0.csv").exists());
    }
}

#[test]
fn injected_labels_replace_the_forest() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    let data = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    // Label = 1 exactly when X is in its upper half: X alone decides the outcome.
    let mut labels = String::from("label\n");
    for line in data.lines().skip(1) {
        let x: f64 = line.split(',').next().unwrap().parse().unwrap();
        labels.push_str(if x >= 0.5 { "1\n" } else { "0\n" });
    }
    std::fs::write(dir.path().join("labels.csv"), labels).unwrap();
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--no-graph", "--labels-csv", "labels.csv", "--out-json", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["variables"][0]["max_nesuf"].as_f64().unwrap(), 1.0);

    std::fs::write(dir.path().join("short.csv"), "label\n1\n0\n").unwrap();
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--no-graph", "--labels-csv", "short.csv", "--out-json", "r.json"],
        dir.path(),
    );
    assert_ne!(code(&o), 0);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    simulate_c(dir.path());
    std::fs::write(dir.path().join("cfg.json"), r#"{"bins": 4, "forest": {"n_trees": 10}}"#).unwrap();
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--no-graph", "--bins", "8", "--config", "cfg.json", "--out-json", "r.json", "--out-csv", "r.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let max_code = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u32>().unwrap())
        .max()
        .unwrap();
    assert_eq!(max_code, 3);

    std::fs::write(dir.path().join("bad.json"), r#"{"bogus": 1}"#).unwrap();
    let o = cfx(
        &["explain", "--data", "c.csv", "--target", "Y", "--no-graph", "--config", "bad.json", "--out-json", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_writes_summary_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ev.json"),
        r#"{"benchmark": {"kind": "three", "structure": "C", "form": "linear"},
            "n": 1000, "trials": 2, "methods": ["lingam"], "modes": ["0"], "include_true_graph": true,
            "forest": {"n_trees": 10}}"#,
    )
    .unwrap();
    let o = cfx(&["evaluate", "--config", "ev.json", "--out", "s.csv", "--trials-out", "t.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(s.starts_with("method,mode,mae_mean,mae_stderr,spr_mean,n_trials\n"));
    assert!(s.contains("True graph,,0.0000,0.0000"));
    assert_eq!(json(&dir.path().join("t.json")).as_array().unwrap().len(), 2);

    std::fs::write(dir.path().join("bad.json"), r#"{"trials": 0}"#).unwrap();
    assert_eq!(code(&cfx(&["evaluate", "--config", "bad.json", "--out", "s.csv"], dir.path())), 2);
}

#[test]
fn reproduce_rejects_unknown_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfx(&["reproduce", "--tables", "9", "--out-dir", "out"], dir.path());
    assert_eq!(code(&o), 2);
}
