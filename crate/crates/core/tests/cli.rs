use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn seldoor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seldoor"))
        .args(args)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn interaction_graph_projects_nonlinear_vertex() {
    let model = data("interaction.json");
    let out = seldoor(&[
        "check",
        &model,
        "--outcome",
        "M",
        "--treatment",
        "X",
        "--adjust",
        "Z",
    ]);
    assert_eq!(out.status.code(), Some(0));

    let out = seldoor(&[
        "check",
        &model,
        "--outcome",
        "Y",
        "--treatment",
        "X",
        "--adjust",
        "Z,H",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = report(&out);
    assert_eq!(v["verdict"]["witness"]["kind"], "unblocked_backdoor");
    assert_eq!(v["verdict"]["witness"]["path"], "X <-> H <-> M -> Y");
}

#[test]
fn structure_only_model_rejected_for_numeric_commands() {
    let out = seldoor(&[
        "effect",
        &data("interaction.json"),
        "--outcome",
        "M",
        "--treatment",
        "X",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn criterion_flavours_disagree_on_post_treatment_adjustment() {
    let fig1 = data("fig1.json");
    let base = [
        "check",
        &fig1,
        "--outcome",
        "Y",
        "--treatment",
        "X",
        "--adjust",
        "M1",
    ];
    assert_eq!(seldoor(&base).status.code(), Some(0));
    let mut backdoor = base.to_vec();
    backdoor.extend(["--criterion", "backdoor"]);
    assert_eq!(seldoor(&backdoor).status.code(), Some(1));
    let mut single = base.to_vec();
    single.extend(["--criterion", "singledoor"]);
    assert_eq!(seldoor(&single).status.code(), Some(1));
}

#[test]
fn verify_reports_bias_for_violating_query() {
    let out = seldoor(&[
        "verify",
        &data("worked.json"),
        "--outcome",
        "Y",
        "--treatment",
        "X",
        "--adjust",
        "M2",
        "--trials",
        "200",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["criterion_verdict"], false);
    assert_eq!(v["agree_count"], 200);
    assert_eq!(v["disagreements"].as_array().unwrap().len(), 0);
}

#[test]
fn simulate_writes_file_matching_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    let chain = data("chain.json");
    let to_file = seldoor(&[
        "simulate",
        &chain,
        "--n",
        "500",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(to_file.status.code(), Some(0));
    let v = report(&to_file);
    assert_eq!(v["rows"], 500);
    let to_stdout = seldoor(&["simulate", &chain, "--n", "500", "--seed", "11"]);
    assert_eq!(std::fs::read(&path).unwrap(), to_stdout.stdout);
}

#[test]
fn simulate_rejects_unknown_distribution() {
    let out = seldoor(&[
        "simulate",
        &data("chain.json"),
        "--n",
        "10",
        "--dist",
        "cauchy",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonlinear_demo_is_reproducible() {
    let args = [
        "nonlinear-demo",
        "--n",
        "20000",
        "--seed",
        "5",
        "--grid",
        "1,2",
    ];
    let first = seldoor(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, seldoor(&args).stdout);
    let v = report(&first);
    assert_eq!(v["grid"].as_array().unwrap().len(), 2);
}
