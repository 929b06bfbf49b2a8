use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridspam"));
    c.env_remove("HYBRIDSPAM_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate_json(args: &[&str]) -> serde_json::Value {
    let o = run(&[&["simulate", "--n", "800"], args].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["generate", "--n", "100", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.meta.json")).unwrap(),
        std::fs::read(dir.path().join("b.meta.json")).unwrap()
    );
}

#[test]
fn generate_default_has_5000_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    assert_eq!(code(&run(&["generate", "--out", out.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 5001);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["generate", "--q", "1.5", "--out", "/dev/null"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["sweep", "--step", "0.3"])), 2);
    assert_eq!(code(&run(&["simulate", "--corpus", "/definitely/not/here.csv"])), 2);
    assert_eq!(code(&run(&["simulate", "--h1", "0.9", "--h2", "0.1"])), 2);
    assert_eq!(code(&run(&["table", "--pairs", "0.1-0.2"])), 2);
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["generate", "simulate", "sweep", "table", "verify-protocols"] {
        assert!(stdout(&o).contains(sub), "{sub}");
    }
}

#[test]
fn collapsed_thresholds_never_challenge() {
    let v = simulate_json(&["--h1", "0.5", "--h2", "0.5"]);
    assert_eq!(v["pathway_counts"]["ChallengedDelivered"], 0);
    assert_eq!(v["pathway_counts"]["ChallengedDropped"], 0);
}

#[test]
fn total_hops_do_not_depend_on_protocol() {
    let a = simulate_json(&["--protocol", "p1", "--seed", "5"]);
    let b = simulate_json(&["--protocol", "p3", "--seed", "5"]);
    assert_eq!(a["total_hops"], b["total_hops"]);
}

#[test]
fn perfect_challenges_deliver_every_normal() {
    let v = simulate_json(&["--e1", "0", "--e2", "0", "--h1", "0", "--h2", "1"]);
    let c = &v["pathway_counts"];
    let delivered = c["DirectNormal"].as_u64().unwrap() + c["ChallengedDelivered"].as_u64().unwrap();
    let truth_normal = v["confusion"]["tp"].as_f64().unwrap() + v["confusion"]["fn_"].as_f64().unwrap();
    assert_eq!(delivered as f64, truth_normal);
}

#[test]
fn simulate_reads_a_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.csv");
    let report = dir.path().join("r.json");
    assert_eq!(code(&run(&["generate", "--n", "300", "--out", corpus.to_str().unwrap()])), 0);
    let o = run(&[
        "simulate",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("total_hops"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let c = &v["pathway_counts"];
    let total: u64 = ["DirectNormal", "ChallengedDelivered", "ChallengedDropped", "DirectSpam"]
        .iter()
        .map(|k| c[*k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 300);
}

#[test]
fn seed_env_var_is_the_default_seed() {
    let via_flag = simulate_json(&["--seed", "99", "--e1", "0.4", "--e2", "0.4"]);
    let o = bin()
        .args(["simulate", "--n", "800", "--e1", "0.4", "--e2", "0.4"])
        .env("HYBRIDSPAM_SEED", "99")
        .output()
        .unwrap();
    let via_env: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(via_flag, via_env);
}

#[test]
fn table_single_row() {
    let o = run(&["table", "--proportions", "0.1", "--pairs", "0.1:0.2", "--runs", "3", "--n", "500"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "proportion,h1,h2,ta_mean,ta_std,ratio_mean,ratio_std,acc_mean,acc_std,runs");
    assert_eq!(lines.len(), 2);
}

#[test]
fn table_default_layout() {
    let o = run(&["table", "--mode", "analytic"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 21);
}

#[test]
fn sweep_half_step_has_six_cells_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&["sweep", "--step", "0.5", "--runs", "2", "--n", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 7);
    assert!(Path::new(&out.with_extension("json")).exists());
}

#[test]
fn verify_protocols_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traces.json");
    let o = run(&["verify-protocols", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("FAIL"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(v["failed"], 0);
}
