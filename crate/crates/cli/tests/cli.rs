use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnet")).current_dir(dir).args(args).output().expect("binary runs")
}

fn gnet_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnet"))
        .current_dir(dir)
        .env(key, value)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const XOR: &str = r#"{
  "seed": 3,
  "task": {"kind": "xor"},
  "topology": {"layers": [2, 2, 1]},
  "trainer": {"algorithm": "gd", "eta": 0.05, "max_iters": 300, "output_rate": 0.05, "init_range": [0.0, 1.0]},
  "output": {"dir": "run"}
}"#;

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

#[test]
fn train_writes_model_report_and_trace() {
    let dir = setup(XOR);
    let o = gnet(dir.path(), &["train", "-c", "cfg.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["trainer"]["eta"], 0.05);
    assert_eq!(report["train"]["config"]["rng_seed"], 3);
    assert_eq!(report["train"]["iterations"], 300);
    let trace = fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 301);
    assert!(dir.path().join("run/model.json").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = setup(XOR);
    let read = |sub: &str, files: &[&str]| -> Vec<Vec<u8>> {
        files.iter().map(|f| fs::read(dir.path().join(sub).join(f)).unwrap()).collect()
    };
    let all = ["model.json", "report.json", "trace.csv"];
    assert_eq!(code(&gnet(dir.path(), &["train", "-c", "cfg.json", "--out", "a"])), 0);
    let first = read("a", &all);
    assert_eq!(code(&gnet_env(dir.path(), &["train", "-c", "cfg.json", "--out", "a"], "GNET_THREADS", "1")), 0);
    assert_eq!(first, read("a", &all));
    // the report echoes the output directory, model and trace do not
    assert_eq!(code(&gnet_env(dir.path(), &["train", "-c", "cfg.json", "--out", "b"], "GNET_THREADS", "3")), 0);
    assert_eq!(read("a", &all[..1]), read("b", &all[..1]));
    assert_eq!(read("a", &all[2..]), read("b", &all[2..]));
    assert_eq!(code(&gnet(dir.path(), &["train", "-c", "cfg.json", "--out", "c", "--seed", "4"])), 0);
    assert_ne!(read("a", &all[2..]), read("c", &all[2..]));
}

#[test]
fn eval_reproduces_the_final_training_mse() {
    let dir = setup(XOR);
    assert_eq!(code(&gnet(dir.path(), &["train", "-c", "cfg.json"])), 0);
    assert_eq!(code(&gnet(dir.path(), &["gen", "xor", "-o", "xor.csv"])), 0);
    let o = gnet(dir.path(), &["eval", "-m", "run/model.json", "-d", "xor.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    let last = report["train"]["loss_trace"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!((m["metrics"]["mse"].as_f64().unwrap() - last).abs() < 1e-12);

    let o = gnet(dir.path(), &["predict", "-m", "run/model.json", "-d", "xor.csv", "-o", "pred.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("pred.csv")).unwrap().lines().count(), 5);
}

#[test]
fn esqn_run_round_trips_through_eval() {
    let dir = setup(r#"{"seed": 1, "task": {"kind": "fm_sine", "length": 600, "noise": 0.02}, "esqn": {"trials": 3}}"#);
    let o = gnet(dir.path(), &["train", "-c", "cfg.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("(95% CI ["), "{out}");
    assert_eq!(code(&gnet(dir.path(), &["gen", "fm_sine:300:0.02", "--seed", "8", "-o", "s.csv"])), 0);
    let o = gnet(dir.path(), &["eval", "-m", "model.json", "-d", "s.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m["metrics"]["nmse"].as_f64().unwrap() < 0.1);
}

#[test]
fn gen_tasks() {
    let dir = TempDir::new().unwrap();
    let rows = |args: &[&str]| {
        let o = gnet(dir.path(), args);
        assert_eq!(code(&o), 0);
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(rows(&["gen", "xor"]).lines().count(), 5);
    assert_eq!(rows(&["gen", "parity:3"]).lines().count(), 9);
    assert_eq!(rows(&["gen", "sine:100", "--seed", "4"]), rows(&["gen", "sine:100", "--seed", "4"]));
    assert_ne!(rows(&["gen", "sine:100", "--seed", "4"]), rows(&["gen", "sine:100", "--seed", "5"]));
}

#[test]
fn oracles() {
    let dir = TempDir::new().unwrap();
    let o = gnet(dir.path(), &["oracle", "gradcheck", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["pass"].as_bool().unwrap() && v["max_deviation"].as_f64().unwrap() < 1e-5);

    fs::write(
        dir.path().join("mm1.json"),
        r#"{"network": {"w_plus": [[0]], "rates": [1.0], "lambda_plus": [0.3]}, "cap": 60, "tolerance": 1e-8}"#,
    )
    .unwrap();
    assert_eq!(code(&gnet(dir.path(), &["oracle", "ctmc", "-c", "mm1.json"])), 0);
    assert_eq!(code(&gnet(dir.path(), &["oracle", "productform", "-c", "mm1.json"])), 0);

    let zeros = "[[0,0,0,0,0],[0,0,0,0,0],[0,0,0,0,0],[0,0,0,0,0],[0,0,0,0,0]]";
    fs::write(
        dir.path().join("five.json"),
        format!(r#"{{"network": {{"w_plus": {zeros}, "rates": [1,1,1,1,1], "lambda_plus": [0.5,0.5,0.5,0.5,0.5]}}, "cap": 3}}"#),
    )
    .unwrap();
    let o = gnet(dir.path(), &["oracle", "ctmc", "-c", "five.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("guard"));

    // ϱ = 0.9 with a tiny cap fails the comparison rather than the guard
    fs::write(
        dir.path().join("tight.json"),
        r#"{"network": {"w_plus": [[0]], "rates": [1.0], "lambda_plus": [0.5]}, "cap": 60, "tolerance": 1e-30}"#,
    )
    .unwrap();
    assert_eq!(code(&gnet(dir.path(), &["oracle", "ctmc", "-c", "tight.json"])), 1);
}

/// `(description, config or None for a missing file, expected exit code)`.
#[test]
fn exit_code_matrix() {
    let cases: &[(&str, Option<&str>, i32)] = &[
        ("valid", Some(XOR), 0),
        ("missing config", None, 2),
        ("not json", Some("{task: xor"), 2),
        ("unknown algorithm", Some(r#"{"task": {"kind": "xor"}, "topology": {"layers": [2,2,1]}, "trainer": {"algorithm": "adam"}}"#), 2),
        ("unknown field", Some(r#"{"task": {"kind": "xor"}, "topology": {"layers": [2,2,1]}, "trainr": {}}"#), 2),
        ("eta out of range", Some(r#"{"task": {"kind": "xor"}, "topology": {"layers": [2,2,1]}, "trainer": {"eta": 2}}"#), 2),
        ("both data sources", Some(r#"{"task": {"kind": "xor"}, "dataset": {"path": "x.csv", "inputs": ["a"], "targets": ["b"]}, "topology": {"layers": [1,1]}}"#), 2),
        ("no data source", Some(r#"{"topology": {"layers": [2,2,1]}}"#), 2),
        ("zero layer", Some(r#"{"task": {"kind": "xor"}, "topology": {"layers": [2,0,1]}}"#), 2),
        ("layers disagree with data", Some(r#"{"task": {"kind": "xor"}, "topology": {"layers": [3,2,1]}}"#), 2),
        ("missing dataset file", Some(r#"{"dataset": {"path": "none.csv", "inputs": ["a"], "targets": ["b"]}, "topology": {"layers": [1,1]}}"#), 2),
        ("parity too large", Some(r#"{"task": {"kind": "parity", "n": 12}, "topology": {"layers": [12,1]}}"#), 2),
        ("series too short for the readout", Some(r#"{"task": {"kind": "fm_sine", "length": 100}, "esqn": {"trials": 0}}"#), 1),
        ("edge topology", Some(r#"{"task": {"kind": "xor"}, "topology": {"edges": {"roles": ["input","input","hidden","output"], "edges": [[0,2],[1,2],[2,3],[0,3]]}}, "trainer": {"max_iters": 5}}"#), 0),
    ];
    for (name, config, want) in cases {
        let dir = TempDir::new().unwrap();
        if let Some(c) = config {
            fs::write(dir.path().join("cfg.json"), c).unwrap();
        }
        let o = gnet(dir.path(), &["train", "-c", "cfg.json"]);
        assert_eq!(code(&o), *want, "{name}: {}", stderr(&o));
    }
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&gnet(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&gnet(dir.path(), &["--help"])), 0);
    assert_eq!(code(&gnet(dir.path(), &["gen", "parity:0"])), 2);
    assert_eq!(code(&gnet(dir.path(), &["gen", "xor", "--lag", "2"])), 2);
    assert_eq!(code(&gnet_env(dir.path(), &["gen", "xor"], "GNET_THREADS", "many")), 2);
}

#[test]
fn config_errors_name_the_field() {
    let dir = setup(r#"{"task": {"kind": "xor"}, "topology": {"layers": [2,2,1]}, "trainer": {"algorithm": "adam"}}"#);
    let err = stderr(&gnet(dir.path(), &["train", "-c", "cfg.json"]));
    assert!(err.contains("trainer.algorithm") && err.contains("line 1"), "{err}");
}

#[test]
fn eval_errors() {
    let dir = setup(XOR);
    assert_eq!(code(&gnet(dir.path(), &["train", "-c", "cfg.json"])), 0);
    fs::write(dir.path().join("three.csv"), "a,b,c,y\n0,1,0,1\n1,1,0,0\n").unwrap();
    let o = gnet(dir.path(), &["eval", "-m", "run/model.json", "-d", "three.csv", "--inputs", "a,b,c", "--targets", "y"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("2 inputs") && stderr(&o).contains('3'), "{}", stderr(&o));
    assert_eq!(code(&gnet(dir.path(), &["eval", "-m", "absent.json", "-d", "three.csv"])), 2);
    assert_eq!(code(&gnet(dir.path(), &["eval", "-m", "run/model.json", "-d", "absent.csv"])), 2);
    fs::write(dir.path().join("wide.csv"), "x1,x2,y1\n0,5,1\n").unwrap();
    assert_eq!(code(&gnet(dir.path(), &["eval", "-m", "run/model.json", "-d", "wide.csv"])), 1);
}

#[test]
fn never_overwrites_inputs() {
    let dir = setup(XOR);
    assert_eq!(code(&gnet(dir.path(), &["train", "-c", "cfg.json"])), 0);
    assert_eq!(code(&gnet(dir.path(), &["gen", "xor", "-o", "xor.csv"])), 0);
    let before = fs::read(dir.path().join("xor.csv")).unwrap();
    let o = gnet(dir.path(), &["eval", "-m", "run/model.json", "-d", "xor.csv", "-o", "xor.csv"]);
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read(dir.path().join("xor.csv")).unwrap(), before);
}
