// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hdcx"))
}

fn wdbc() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small<'a>(cmd: &'a str, data: &'a str) -> Vec<&'a str> {
    vec![cmd, "--data", data, "--label-col", "diagnosis", "--dim", "1000", "--levels", "11", "--folds", "5"]
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn evaluate_is_reproducible_and_json() {
    let data = wdbc();
    let data = data.to_str().unwrap();
    let a = run(&small("evaluate", data));
    let b = run(&small("evaluate", data));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["experiment"], "evaluate");
    assert_eq!(v["baseline"]["fold_accuracies"].as_array().unwrap().len(), 5);
    assert!(v.get("timings").is_none());
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.hdcx");
    let data = wdbc();
    let data = data.to_str().unwrap();
    let mut args = small("train", data);
    args.extend(["--out", model.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["predict", "--model", model.to_str().unwrap(), "--data", data, "--label-col", "diagnosis"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 570);
    assert!(text.starts_with("row,prediction,cluster,distance\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("accuracy"));

    // columns are matched by name, so order and missing labels do not matter
    let unlabeled = write(dir.path(), "two.csv", &{
        let src = std::fs::read_to_string(data).unwrap();
        let mut lines = src.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let keep: Vec<usize> = (0..header.len() - 1).rev().collect();
        let pick = |v: &[&str]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>().join(",");
        format!("{}\n{}\n", pick(&header), pick(&row))
    });
    let o = run(&["predict", "--model", model.to_str().unwrap(), "--data", &unlabeled]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first_full = text.lines().nth(1).unwrap().to_string();
    let first_reordered = String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap().to_string();
    assert_eq!(first_full, first_reordered);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = wdbc();
    let data = data.to_str().unwrap();

    // configuration: M - 1 does not divide D
    let mut args = small("evaluate", data);
    args[8] = "7";
    let o = run(&args);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("divide"));
    assert_eq!(code(&run(&["evaluate"])), 2);
    assert_eq!(code(&run(&["perturb", "--data", data, "--label-col", "diagnosis", "--mode", "bitflip", "--values", "0.7"])), 2);

    // data problems
    assert_eq!(code(&run(&small("evaluate", "/nonexistent.csv"))), 3);
    let bad = write(dir.path(), "bad.csv", "a,b,diagnosis\n1,2,x\n3,oops,y\n1,1,x\n");
    let o = run(&small("evaluate", &bad));
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("'b'"), "{err}");
    let no_label = write(dir.path(), "nolabel.csv", "a,b\n1,2\n");
    assert_eq!(code(&run(&small("evaluate", &no_label))), 3);

    // model files
    let junk = write(dir.path(), "junk.hdcx", "not a model");
    assert_eq!(code(&run(&["predict", "--model", &junk, "--data", data])), 4);
    assert_eq!(code(&run(&["predict", "--model", "/nonexistent.hdcx", "--data", data])), 4);
}

#[test]
fn perturb_and_sweep_reports() {
    let data = wdbc();
    let data = data.to_str().unwrap();
    for (mode, values) in [("noise", "0.1"), ("subsample", "0.5"), ("bitflip", "0.1")] {
        let mut args = small("perturb", data);
        args.extend(["--mode", mode, "--values", values]);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{mode}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["curve"].as_array().unwrap().len(), 1);
    }
    let mut args = small("sweep", data);
    args.extend(["--axis", "clusters", "--values", "1,2"]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["experiment"], "sweep-clusters");
    assert_eq!(v["curve"][1]["value"], 2.0);
}

#[test]
fn check_theory_runs() {
    let o = run(&["check-theory", "--trials", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["reports"].as_array().unwrap().len() > 10);
}
