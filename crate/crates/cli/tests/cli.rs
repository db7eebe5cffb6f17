use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn depm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depm")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_log(dir: &Path, name: &str) -> PathBuf {
    let log = dir.join(format!("{name}.log"));
    let o = depm(&["run", fixture(&format!("{name}.jsonl")).to_str().unwrap(), "--log", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    log
}

#[test]
fn run_then_replay_and_digest_agree() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_log(dir.path(), "hal_binary");
    let o = depm(&["replay", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let head = stdout(&depm(&["digest", log.to_str().unwrap()])).trim().to_owned();
    assert_eq!(head.len(), 64);
    assert!(stdout(&o).contains(&head));
}

#[test]
fn run_without_log_prints_to_stdout() {
    let o = depm(&["run", fixture("scalar.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("depm-log/1"));
    assert_eq!(text.lines().count(), 15);
}

#[test]
fn tampered_log_exits_5_and_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_log(dir.path(), "scalar");
    let text = std::fs::read_to_string(&log).unwrap();
    let bad = text.replacen("\"amount\":5000000", "\"amount\":5000001", 1);
    assert_ne!(bad, text);
    std::fs::write(&log, bad).unwrap();
    let o = depm(&["replay", log.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 7"));
}

#[test]
fn command_error_exits_3() {
    let o = depm(&["run", fixture("overdraft.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 3"));
}

#[test]
fn failed_assertion_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.jsonl");
    std::fs::write(
        &s,
        "{\"schema\":\"depm-scenario/1\",\"seed\":0}\n\
         {\"verb\":\"faucet\",\"account\":\"a\",\"cash\":5}\n\
         {\"verb\":\"assert\",\"check\":\"cash\",\"account\":\"a\",\"eq\":6}\n",
    )
    .unwrap();
    assert_eq!(code(&depm(&["run", s.to_str().unwrap()])), 2);
}

#[test]
fn strict_turns_partial_scans_into_failures() {
    let f = fixture("wta_arbitrage.jsonl");
    assert_eq!(code(&depm(&["run", f.to_str().unwrap()])), 0);
    assert_eq!(code(&depm(&["run", f.to_str().unwrap(), "--strict"])), 2);
}

#[test]
fn parse_and_usage_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("bad.jsonl");
    std::fs::write(&s, "{\"verb\":\"split\"\n").unwrap();
    let o = depm(&["run", s.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(code(&depm(&["run", "/nonexistent/x.jsonl"])), 4);
    assert_eq!(code(&depm(&["frobnicate"])), 4);
}

#[test]
fn snapshot_at_a_record_matches_from_scenario_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_log(dir.path(), "chained_dispute_vote");
    let f = fixture("chained_dispute_vote.jsonl");
    let a = stdout(&depm(&["snapshot", f.to_str().unwrap(), "--at", "12"]));
    let b = stdout(&depm(&["snapshot", log.to_str().unwrap(), "--at", "12"]));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], "depm-snapshot/1");
    assert_eq!(v["markets"]["hal"]["register"]["state"], "unresolved");
    let end: serde_json::Value = serde_json::from_str(&stdout(&depm(&["snapshot", f.to_str().unwrap()]))).unwrap();
    assert_eq!(end["markets"]["hal"]["register"]["outcome"], "False");
}

#[test]
fn solvency_and_arbitrage_reports() {
    let f = fixture("wta_arbitrage.jsonl");
    let o = depm(&["check-solvency", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["markets"][0]["solvent"], true);

    // after record 12 the 0.22 ask is resting and the scan flags it
    let o = depm(&["arb-scan", f.to_str().unwrap(), "--at", "12", "--market", "abc"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["flags"][0]["kind"], "SUM_ASKS_LT_1");
    assert_eq!(v["flags"][0]["profit"], 100_000);
}
