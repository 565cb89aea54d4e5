use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fdadd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdadd"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    fs::write(
        &path,
        format!(
            r#"{{
              "scenario": "A", "n_train": 5, "n_test": 10, "m": 20,
              "k_grid": [4, 5, 6, 8], "replicates": 3,
              "methods": ["fixed", "caic"], "fixed_k": 8, "seed": 3{extra}
            }}"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn demo_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let o = fdadd(&["demo-fig1", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("fig1-demo"), "{text}");
    assert!(text.contains("median MSE peaks at K ="), "{text}");
    for f in ["records.csv", "methods.csv", "summary.csv", "curve.svg"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 117);
}

#[test]
fn run_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#", "out_dir": "from-config""#);
    let o = fdadd(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = fs::read_to_string(dir.path().join("from-config/records.csv")).unwrap();
    assert_eq!(records.lines().next(), Some("replicate,K,mse"));
    assert_eq!(records.lines().count(), 1 + 3 * 4);
    let methods = fs::read_to_string(dir.path().join("from-config/methods.csv")).unwrap();
    assert_eq!(methods.lines().count(), 1 + 3 * 2);
    assert!(stdout(&o).contains("caic: mean MSE"));
}

#[test]
fn out_flag_and_seed_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let run = |seed: &str, threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = fdadd(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("records.csv")).unwrap()
    };
    let a = run("9", "1", "a");
    let b = run("9", "2", "b");
    let c = run("10", "1", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sweep_data_on_csv() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    let times: Vec<String> = (0..12).map(|j| (900 + 2 * j).to_string()).collect();
    let mut xs = times.join(",") + "\n";
    let mut ys = String::from("octane\n");
    for i in 0..14 {
        let row: Vec<String> = (0..12)
            .map(|j| format!("{:.4}", ((i * 7 + j * 3) % 11) as f64 * 0.1 + (j as f64 * 0.3).sin()))
            .collect();
        xs += &(row.join(",") + "\n");
        ys += &format!("{}\n", if i == 3 { "NA".to_string() } else { format!("{}", 85.0 + (i % 5) as f64) });
    }
    fs::write(&x, xs).unwrap();
    fs::write(&y, ys).unwrap();
    let out = dir.path().join("out");
    let o = fdadd(&[
        "sweep-data",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--train-size",
        "8",
        "--k-min",
        "4",
        "--k-max",
        "9",
        "--replicates",
        "2",
        "--methods",
        "cv,fixed",
        "--folds",
        "4",
        "--fixed-k",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("loaded 13 row(s)"), "{text}");
    assert!(text.contains("dropped 1"), "{text}");
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 6);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"scenario": "A", "replicats": 4}"#).unwrap();
    let o = fdadd(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicats"), "{}", stderr(&o));

    let o = fdadd(&["sweep-data", "--x", "a", "--y", "b", "--train-size", "3", "--methods", "bic"]);
    assert_eq!(o.status.code(), Some(2));

    let o = fdadd(&["sweep-data", "--x", "a", "--y", "b", "--train-size", "3", "--k-min", "9", "--k-max", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdadd(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    fs::write(&x, "1,2,3\n1,2,3\n4,five,6\n").unwrap();
    fs::write(&y, "y\n1\n2\n").unwrap();
    let o = fdadd(&[
        "sweep-data",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--train-size",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
}
