use robust_sgd::data::{synth_gaussian, write_libsvm_file};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-sgd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth_file(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("synth{seed}.svm"));
    write_libsvm_file(&synth_gaussian(n, 4, 3.0, seed).unwrap(), &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_trace_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), 200, 1);
    let test = synth_file(dir.path(), 100, 2);
    let (m1, m2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for m in [&m1, &m2] {
        let o = run(&[
            "train",
            "--dataset",
            s(&data),
            "--test",
            s(&test),
            "--method",
            "sgd-sramp",
            "--epochs",
            "15",
            "--seed",
            "4",
            "--out",
            s(m),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("test_err_pct="));
    }
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let trace = std::fs::read_to_string(dir.path().join("a.trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(
        lines[0],
        "epoch,objective,train_err_pct,test_err_pct,elapsed_s"
    );
    assert_eq!(lines.len(), 16);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(&m1).unwrap()).unwrap();
    assert_eq!(model["method"], "sgd-sramp");
    assert_eq!(model["model"]["weights"].as_array().unwrap().len(), 5);
}

#[test]
fn every_method_trains() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), 100, 3);
    for m in [
        "sgd-sramp",
        "sgd-rgomp",
        "sgd-hinge",
        "sgd-log",
        "sgd-ramp",
        "asgd-log",
        "pegasos",
    ] {
        let out = dir.path().join(format!("{m}.json"));
        let o = run(&[
            "train",
            "--dataset",
            s(&data),
            "--method",
            m,
            "--lambda",
            "0.01",
            "--normalize",
            "--out",
            s(&out),
        ]);
        assert!(
            o.status.success(),
            "{m}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--method", "sgd-sramp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(
        run(&[
            "train",
            "--dataset",
            "x",
            "--method",
            "sgd-nope",
            "--out",
            "m"
        ])
        .status
        .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.svm");
    std::fs::write(&bad, "+1 1:0.5\n-1 3:1 2:1\n").unwrap();
    let o = run(&[
        "train",
        "--dataset",
        s(&bad),
        "--method",
        "sgd-hinge",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let data = synth_file(dir.path(), 100, 5);
    let o = run(&[
        "train",
        "--dataset",
        s(&data),
        "--method",
        "sgd-hinge",
        "--eta",
        "1e3",
        "--lambda",
        "10",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let missing = dir.path().join("missing.svm");
    let o = run(&[
        "train",
        "--dataset",
        s(&missing),
        "--method",
        "sgd-hinge",
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cv_table_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), 200, 6);
    let out = dir.path().join("cv.csv");
    let o = run(&[
        "cv",
        "--dataset",
        s(&data),
        "--method",
        "sgd-hinge",
        "--lambdas",
        "0.01,0.01",
        "--folds",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("selected_lambda=0.01"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    assert!(lines.iter().all(|l| l.split(',').count() == 7));
    let o = run(&[
        "cv",
        "--dataset",
        s(&data),
        "--method",
        "sgd-hinge",
        "--folds",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flip_reports_exact_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), 100, 7);
    let out = dir.path().join("flipped.svm");
    let o = run(&[
        "flip",
        "--dataset",
        s(&data),
        "--noise",
        "0.2",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "flipped 20 of 100 labels");
    let label = |l: &str| l.split(' ').next().unwrap().to_string();
    let before = std::fs::read_to_string(&data).unwrap();
    let after = std::fs::read_to_string(&out).unwrap();
    let changed = before
        .lines()
        .zip(after.lines())
        .filter(|(a, b)| label(a) != label(b))
        .count();
    assert_eq!(changed, 20);
    assert_eq!(
        run(&[
            "flip",
            "--dataset",
            s(&data),
            "--noise",
            "1.5",
            "--out",
            s(&out)
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn bench_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "noise_fractions = [0.0, 0.2]\nmethods = [\"sgd-sramp\", \"pegasos\"]\nrepeats = 2\ncv_folds = 3\n\
         lambda_grid = [1e-3, 1e-1]\nmaster_seed = 11\n[synthetic]\nn = 300\ndim = 4\nseparation = 3.0\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&[
        "bench",
        "--spec",
        s(&spec),
        "--out",
        s(&a),
        "--threads",
        "1"
    ])
    .status
    .success());
    assert!(run(&[
        "bench",
        "--spec",
        s(&spec),
        "--out",
        s(&b),
        "--threads",
        "3"
    ])
    .status
    .success());
    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(b.join("results.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("report.json")).unwrap(),
        std::fs::read(b.join("report.json")).unwrap()
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "method,noise,mean_err,std_err,variance,mean_obj,lambda,epochs"
    );
    assert_eq!(lines.len(), 5);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pegasos_epoch_cap"], 50);
    assert_eq!(report["cells"][0]["trials"].as_array().unwrap().len(), 2);

    std::fs::write(&spec, "repeats = 0\n").unwrap();
    assert_eq!(
        run(&["bench", "--spec", s(&spec), "--out", s(&a)])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn check_assertions() {
    let o = run(&[
        "check",
        "--loss",
        "sramp:s=-1,a=2,b=-0.03",
        "--require-robust",
    ]);
    assert!(o.status.success());
    let o = run(&["check", "--loss", "hinge", "--require-robust"]);
    assert_eq!(o.status.code(), Some(5));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["conditions"][0]["bounded"], false);
    let o = run(&["check", "--grad", "--loss", "rgomp:c=2"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["gradient"][0]["max_rel_err"].as_f64().unwrap() < 1e-5);
}

#[test]
fn check_probe_on_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), 200, 8);
    let o = run(&[
        "check",
        "--loss",
        "sramp:s=-1,a=2,b=-0.03",
        "--probe",
        s(&data),
        "--lambda",
        "0.01",
        "--samples",
        "20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &doc["probe"][0]["report"];
    let (a, b) = (
        r["alpha_hat"].as_f64().unwrap(),
        r["beta_hat"].as_f64().unwrap(),
    );
    assert!(a <= b && b < 1e3);
}

#[test]
fn losscurve_shapes() {
    let o = run(&[
        "losscurve",
        "--loss",
        "rgomp:c=2",
        "--z-min",
        "0",
        "--z-max",
        "0",
        "--n",
        "1",
    ]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    let value: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(value, (-1.0f64).exp());

    let o = run(&["losscurve", "--z-min", "-5", "--z-max", "5", "--n", "101"]);
    assert_eq!(stdout(&o).lines().count(), 102);
    assert_eq!(
        run(&["losscurve", "--z-min", "1", "--z-max", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fitted_smooth_ramp_tracks_ramp() {
    let o = run(&["fit-sramp", "--s-star", "-1"]);
    assert!(o.status.success());
    let fit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let spec = fit["loss"].as_str().unwrap().to_string();
    assert!((fit["alpha"].as_f64().unwrap() - 2.65054658).abs() < 1e-4);
    let o = run(&[
        "losscurve",
        "--loss",
        "ramp:s=-1",
        "--loss",
        &spec,
        "--z-min",
        "-3",
        "--z-max",
        "3",
        "--n",
        "601",
    ]);
    let text = stdout(&o);
    let mut worst = 0.0f64;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let ramp: f64 = cols[1].parse().unwrap();
        let smooth: f64 = cols[4].parse().unwrap();
        worst = worst.max((ramp - smooth).abs());
    }
    assert!(worst < 0.2, "{worst}");
}
