use std::process::{Command, Output};

fn persum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persum"))
        .args(args)
        .env_remove("PERSUM_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn identical_files_have_full_unigram_recall() {
    let dir = tempfile::tempdir().unwrap();
    let text = "The river rose overnight. Crews closed the north bridge.";
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, text).unwrap();
    std::fs::write(&b, text).unwrap();
    let out = persum(&["eval", "--cand", a.to_str().unwrap(), "--ref", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().any(|l| l == "rouge-1 recall 1.0000"), "{}", stdout(&out));
}

#[test]
fn simulation_is_reproducible() {
    let args = ["simulate", "--mode", "adaptive", "--rounds", "10", "--seed", "7"];
    let first = persum(&args);
    let second = persum(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = stdout(&first);
    assert!(csv.starts_with("round,"));
    assert_eq!(csv.lines().count(), 12);
    assert_eq!(csv, stdout(&second));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = persum(&["eval", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
}

#[test]
fn runtime_failure_exits_with_one() {
    let out = persum(&["eval", "--cand", "/nonexistent/cand.txt", "--ref", "/nonexistent/ref.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cand.txt"));
}

#[test]
fn trained_model_can_be_reused() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let out = persum(&["train-exdos", "--synth", "3", "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = persum(&["summarize", "--synth", "3", "--model", model.to_str().unwrap(), "--budget", "40", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["word_count"].as_u64().unwrap() <= 40);
}
