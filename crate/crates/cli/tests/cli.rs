use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_problabel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn problabel")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small 2-D dataset with soft labels that a logistic model separates.
fn soft_dataset(dir: &Path) {
    let mut s = String::from("z0,z1,hard_label,p0,p1\n");
    for i in 0..16 {
        let y = i % 2;
        let shift = if y == 1 { 2.0 } else { 0.0 };
        let z0 = shift + 0.1 * (i as f64 % 5.0);
        let z1 = shift - 0.07 * (i as f64 % 3.0);
        let p1 = if y == 1 { 0.8 } else { 0.2 };
        s.push_str(&format!("{z0},{z1},{y},{},{p1}\n", 1.0 - p1));
    }
    fs::write(dir.join("data.csv"), s).unwrap();
}

#[test]
fn evaluate_writes_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.csv"),
        "score,label\n0.9,1\n0.8,1\n0.2,0\n0.1,0\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "evaluate", "--scores", "s.csv", "--groups", "2", "--out", "ev",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("accuracy"), "{stdout}");
    for f in [
        "metrics.csv",
        "metrics.json",
        "reliability.csv",
        "reliability.svg",
        "manifest.json",
    ] {
        assert!(dir.path().join("ev").join(f).is_file(), "missing {f}");
    }
    let metrics = fs::read_to_string(dir.path().join("ev/metrics.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    assert_eq!(v["accuracy"], 1.0);
    assert_eq!(v["auc"], 1.0);
}

#[test]
fn evaluate_single_class_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "score,label\n0.9,1\n0.7,1\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "evaluate", "--scores", "s.csv", "--groups", "1", "--out", "ev",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("AUC is undefined"), "{}", stderr(&o));
}

#[test]
fn malformed_scores_exit_2_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "score,label\n0.9,1\nabc,0\n").unwrap();
    let o = run(
        dir.path(),
        &["evaluate", "--scores", "s.csv", "--out", "ev"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "score,label\n0.9,1\n0.1,0\n").unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"bins": 10, "colour": "red"}"#,
    )
    .unwrap();
    let cases: &[&[&str]] = &[
        &["evaluate", "--config", "missing.json"],
        &["evaluate", "--config", "bad.json", "--scores", "s.csv"],
        &["evaluate", "--scores", "s.csv", "--reps", "3"],
        &["evaluate", "--scores", "s.csv", "--seed", "1"],
        &["evaluate", "--scores", "s.csv", "--bins", "0"],
        &["evaluate"],
        &["no-such-command"],
        &["boundary", "--model", "missing.json"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "score,label\n0.9,1\n0.1,0\n").unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = run(
        dir.path(),
        &[
            "evaluate",
            "--scores",
            "s.csv",
            "--groups",
            "2",
            "--out",
            "blocker/sub",
        ],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn cv_lambda_then_boundary_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    soft_dataset(dir.path());
    let o = run(
        dir.path(),
        &[
            "cv-lambda",
            "--data",
            "data.csv",
            "--lambda-grid",
            "0,1",
            "--folds",
            "2",
            "--out",
            "cv",
            "-q",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    for f in [
        "cv_lambda.csv",
        "model.json",
        "loss_stage1.csv",
        "loss_stage2.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join("cv").join(f).is_file(), "missing {f}");
    }

    let o = run(
        dir.path(),
        &[
            "boundary",
            "--model",
            "cv/model.json",
            "--data",
            "data.csv",
            "--resolution",
            "11",
            "--out",
            "bd",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let grid = fs::read_to_string(dir.path().join("bd/boundary.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 11 * 11);

    let o = run(
        dir.path(),
        &["rerun", "cv/manifest.json", "--out", "again", "-q"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "cv_lambda.csv",
        "loss_stage1.csv",
        "loss_stage2.csv",
        "model.json",
    ] {
        let a = fs::read(dir.path().join("cv").join(f)).unwrap();
        let b = fs::read(dir.path().join("again").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs on rerun");
    }
}

#[test]
fn cv_lambda_needs_soft_labels() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("d.csv"),
        "z0,z1,hard_label\n0,0,0\n1,1,1\n0,1,0\n1,0,1\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "cv-lambda",
            "--data",
            "d.csv",
            "--folds",
            "2",
            "--out",
            "cv",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn rerun_rejects_overrides_and_tampered_manifests() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "score,label\n0.9,1\n0.1,0\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "evaluate", "--scores", "s.csv", "--groups", "2", "--out", "ev", "-q",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = run(dir.path(), &["rerun", "ev/manifest.json", "--seed", "3"]);
    assert_eq!(code(&o), 2);

    let path = dir.path().join("ev/manifest.json");
    let text = fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config"]["bins"] = serde_json::json!(7);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let o = run(dir.path(), &["rerun", "ev/manifest.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hash"), "{}", stderr(&o));
}
