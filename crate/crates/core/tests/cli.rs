use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orthoseries"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("ORTHO_EXACT").output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["construct"]).status.code(), Some(1));
    assert_eq!(run(&["construct", "--k", "9"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(&["analyze", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "/nonexistent/file"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn corrupted_fixture_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"check": "scalar-fourteen", "weights": [1.0], "g": [2.0], "g1": [2.0]}"#).unwrap();
    let ok = run(&["verify", "--fixture", p.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    std::fs::write(
        &p,
        r#"{"check": "gram", "times": ["0", "1"], "values": [
            {"body": {"breakpoints": ["1"], "values": [0.0]}},
            {"body": {"breakpoints": ["1"], "values": [2.0]}}]}"#,
    )
    .unwrap();
    let bad = run(&["verify", "--fixture", p.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    let v = json(&bad);
    assert_eq!(v["result"]["id"], "gram");
    assert_eq!(v["passed"], false);
}

#[test]
fn suite_filter_and_jobs() {
    let args = ["verify", "--suite", "half-floor", "--suite", "criteria", "--instances", "20", "--seed", "3"];
    let one = run(&[&["--jobs", "1"], &args[..]].concat());
    let four = run(&[&["--jobs", "4"], &args[..]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let v = json(&one);
    let ids: Vec<&str> = v["suites"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["half-floor", "criteria"]);
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn exact_mode_from_environment() {
    let o = bin()
        .args(["construct", "--k", "2"])
        .env("ORTHO_EXACT", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["config"]["exact"], true);
    assert_eq!(v["gram"]["exact_zero"], true);
    assert_eq!(v["max_partial_sum"]["at_least"][1]["measure"], "1/9");
    let f = json(&run(&["construct", "--k", "2"]));
    assert_eq!(f["config"]["exact"], false);
}

#[test]
fn construct_dump_and_cantor_table() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("process.json");
    let o = run(&["construct", "--b", "grid1", "--dump", dump.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert!(d.is_object());
    let c = run(&["cantor", "--k-max", "4", "--depth", "6"]);
    assert_eq!(c.status.code(), Some(0));
    let v = json(&c);
    assert_eq!(v["tail"].as_array().unwrap().len(), 5);
    assert_eq!(v["tail"][0]["stated_holds"], false);
}
