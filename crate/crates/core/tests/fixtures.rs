use std::path::PathBuf;

use depm_core::log::{self, RunReport, StopKind};
use depm_core::market::Outcome;
use depm_core::scenario::{ParseError, Scenario};
use depm_core::MarketId;
use serde_json::Value;

const U: u64 = 1_000_000;

fn run(name: &str) -> RunReport {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let s = Scenario::parse(&std::fs::read_to_string(path).unwrap()).unwrap();
    log::run(&s)
}

fn clean(name: &str) -> RunReport {
    let r = run(name);
    assert!(r.stop.is_none(), "{name} stopped: {:?}", r.stop);
    assert!(r.engine.halted.is_none());
    r
}

fn records(r: &RunReport) -> Vec<Value> {
    r.lines.iter().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn outcome(r: &RunReport, m: &str) -> Option<Outcome> {
    r.engine.outcome(&MarketId::from(m)).cloned()
}

#[test]
fn empty_scenario_logs_only_a_header() {
    let r = clean("empty.jsonl");
    assert_eq!(r.lines.len(), 1);
    assert!(r.lines[0].contains("depm-log/1"));
}

#[test]
fn overdraft_stops_at_the_failing_transfer() {
    let r = run("overdraft.jsonl");
    let stop = r.stop.unwrap();
    assert_eq!((stop.seq, stop.kind), (3, StopKind::Command));
    assert!(stop.message.starts_with("InsufficientFunds"));
    // the failed step is logged, nothing after it runs
    assert_eq!(r.lines.len(), 4);
    assert_eq!(r.engine.ledger.cash(&"alice".into()), 40 * U);
}

#[test]
fn documentary_market_settles_other() {
    let r = clean("hbo.jsonl");
    assert_eq!(outcome(&r, "hbo"), Some(Outcome::Categorical("Other/Multiple".into())));
    // the undisputed proposer gets the bond back
    assert_eq!(r.engine.ledger.cash(&"proposer".into()), 200 * U);
    let conversions = records(&r).iter().filter(|v| v["command"]["verb"] == "nr_no").count();
    assert_eq!(conversions, 1);
}

#[test]
fn binary_intents_and_optimistic_resolution() {
    let r = clean("hal_binary.jsonl");
    assert_eq!(outcome(&r, "hal"), Some(Outcome::Categorical("False".into())));
    let errors: Vec<String> = records(&r)
        .iter()
        .filter_map(|v| v["error"]["kind"].as_str().map(str::to_owned))
        .collect();
    assert_eq!(errors, ["PriceMismatch", "PricesDoNotCover", "PriceOutOfRange", "WrongStage", "MarketResolved"]);
}

#[test]
fn wash_trading_forces_a_wrong_auto_resolution() {
    let r = clean("auto_resolve_manipulation.jsonl");
    // "wash" should have resolved NO; self-trades at 0.995 made the auto stage propose YES
    assert_eq!(outcome(&r, "wash"), Some(Outcome::Categorical("True".into())));
    // one print below the threshold reset the clock on "dip"; it reached the arbiter by timeout
    assert_eq!(outcome(&r, "dip"), Some(Outcome::Categorical("False".into())));
}

#[test]
fn coalition_captures_a_threshold_vote() {
    let r = clean("whale_capture.jsonl");
    assert_eq!(outcome(&r, "hal"), Some(Outcome::Categorical("True".into())));
    let tally = records(&r).into_iter().find(|v| v["command"]["verb"] == "tally").unwrap();
    let w = &tally["result"]["weights"];
    let yes = w["True"].as_u64().unwrap();
    let no = w["False"].as_u64().unwrap();
    assert_eq!(yes + no, 1_000 * U);
    assert!(yes * 100 >= 65 * (yes + no));
}

#[test]
fn dispute_escalates_to_vote_and_slashes_the_minority() {
    let r = clean("chained_dispute_vote.jsonl");
    assert_eq!(outcome(&r, "hal"), Some(Outcome::Categorical("False".into())));
    let e = &r.engine;
    assert_eq!(e.ledger.cash(&"bob".into()), 1_100 * U);
    assert_eq!(e.ledger.staked(&"v3".into()), 30 * U);
    assert_eq!(e.ledger.gov(&"v3".into()), 8 * U);
    // v2's bad reveal was voided: neither slashed nor paid
    assert_eq!(e.ledger.staked(&"v2".into()) + e.ledger.gov(&"v2".into()), 10 * U);
}

#[test]
fn failed_quorum_falls_back_to_the_arbiter() {
    let r = clean("quorum_fallback.jsonl");
    let tally = records(&r).into_iter().find(|v| v["command"]["verb"] == "tally").unwrap();
    assert_eq!(tally["result"]["verdict"], "NoQuorum");
    assert_eq!(outcome(&r, "abc"), Some(Outcome::Categorical("B".into())));
}

#[test]
fn remaining_fixtures_run_clean() {
    for f in ["lmsr.jsonl", "scalar.jsonl", "seeded_amm.jsonl", "self_settling.jsonl", "wta_arbitrage.jsonl"] {
        let r = clean(f);
        assert!(r.engine.solvency().iter().all(|s| s.solvent), "{f}");
    }
}

#[test]
fn one_sided_book_warns() {
    let r = clean("wta_arbitrage.jsonl");
    assert_eq!(r.warnings.len(), 1);
    assert!(r.warnings[0].message.contains("partial"));
}

#[test]
fn parse_errors_carry_position() {
    let text = "{\"schema\":\"depm-scenario/1\",\"seed\":1}\n# comment\n\n{\"verb\":\"faucet\",\"account\":1}\n";
    match Scenario::parse(text) {
        Err(ParseError::Line { line, column, .. }) => {
            assert_eq!(line, 4);
            assert!(column > 0);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(Scenario::parse("{\"verb\":\"teleport\"}").is_err());
}
