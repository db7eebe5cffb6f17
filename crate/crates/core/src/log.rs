//! Hash-chained event log. Each record carries the command, its result or
//! error, the balance changes it caused and `chain = sha256(prev "\n" body)`,
//! where `body` is the canonical record without the chain field and the first
//! `prev` is the hash of the header line.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::engine::Engine;
use crate::ids::AccountId;
use crate::ledger::{Account, Ledger};
use crate::scenario::{self, Header, Scenario, Step, StepOutcome};
use crate::snapshot::{canonical, sha256_hex};

pub const LOG_SCHEMA: &str = "depm-log/1";

fn header_line(h: &Header) -> String {
    canonical(&json!({ "schema": LOG_SCHEMA, "digest": "sha256", "seed": h.seed, "config": h.config }))
}

fn signed(d: i128) -> Value {
    json!(d)
}

fn account_delta(before: Option<&Account>, after: Option<&Account>) -> Map<String, Value> {
    let empty = Account::default();
    let (b, a) = (before.unwrap_or(&empty), after.unwrap_or(&empty));
    let mut out = Map::new();
    for (name, x, y) in [("cash", b.cash, a.cash), ("gov", b.gov, a.gov), ("staked", b.staked, a.staked)] {
        if x != y {
            out.insert(name.into(), signed(y as i128 - x as i128));
        }
    }
    let mut shares = Map::new();
    let keys: std::collections::BTreeSet<(&crate::ids::MarketId, &String)> = b
        .shares
        .iter()
        .chain(a.shares.iter())
        .flat_map(|(m, labels)| labels.keys().map(move |l| (m, l)))
        .collect();
    for (m, l) in keys {
        let (x, y) = (b.shares_of(m, l), a.shares_of(m, l));
        if x != y {
            shares.insert(format!("{m}/{l}"), signed(y as i128 - x as i128));
        }
    }
    if !shares.is_empty() {
        out.insert("shares".into(), Value::Object(shares));
    }
    out
}

/// Per-account balance changes between two ledger states.
pub fn ledger_delta(before: &Ledger, after: &Ledger) -> Value {
    let ids: std::collections::BTreeSet<&AccountId> = before.accounts.keys().chain(after.accounts.keys()).collect();
    let mut out = Map::new();
    for id in ids {
        let d = account_delta(before.accounts.get(id), after.accounts.get(id));
        if !d.is_empty() {
            out.insert(id.to_string(), Value::Object(d));
        }
    }
    Value::Object(out)
}

/// Executes one step and renders its log line. `prev` is advanced to the new chain head.
fn record(engine: &mut Engine, seq: u64, step: &Step, prev: &mut String) -> (String, StepOutcome) {
    let before = engine.ledger.clone();
    let outcome = scenario::execute(engine, step);
    let mut body = Map::new();
    body.insert("seq".into(), json!(seq));
    body.insert("tick".into(), json!(engine.tick));
    body.insert("command".into(), serde_json::to_value(step).expect("steps serialize"));
    match &outcome {
        StepOutcome::Ok(v) => {
            body.insert("result".into(), v.clone());
        }
        StepOutcome::Rejected(err) => {
            body.insert("error".into(), json!({ "kind": err.kind(), "message": err.to_string() }));
        }
        StepOutcome::Failed(msg) => {
            body.insert("failed".into(), json!(msg));
        }
    }
    let delta = ledger_delta(&before, &engine.ledger);
    body.insert("digest".into(), json!(sha256_hex(canonical(&delta).as_bytes())));
    body.insert("delta".into(), delta);
    let text = canonical(&Value::Object(body.clone()));
    let chain = sha256_hex(format!("{prev}\n{text}").as_bytes());
    body.insert("chain".into(), json!(chain));
    *prev = chain;
    (canonical(&Value::Object(body)), outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub seq: u64,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopKind {
    /// An assertion or `expect_error` did not hold.
    Assertion,
    /// The engine rejected a command that carried no `expect_error`.
    Command,
}

/// Why a run ended before the last step.
#[derive(Clone, Debug, PartialEq)]
pub struct Stop {
    pub seq: u64,
    pub kind: StopKind,
    pub message: String,
}

#[derive(Debug)]
pub struct RunReport {
    /// Header line followed by one line per executed step, without trailing newlines.
    pub lines: Vec<String>,
    pub engine: Engine,
    pub stop: Option<Stop>,
    /// Partial arbitrage scans.
    pub warnings: Vec<Failure>,
}

impl RunReport {
    pub fn log_text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    pub fn head(&self) -> String {
        chain_head(&self.lines)
    }
}

fn chain_head(lines: &[String]) -> String {
    match lines.last() {
        Some(last) if lines.len() > 1 => serde_json::from_str::<Value>(last)
            .ok()
            .and_then(|v| v["chain"].as_str().map(str::to_owned))
            .unwrap_or_default(),
        Some(h) => sha256_hex(h.as_bytes()),
        None => String::new(),
    }
}

/// Runs a scenario, optionally stopping after step `until` (1-based sequence number).
pub fn run_until(s: &Scenario, until: Option<u64>) -> RunReport {
    let mut engine = Engine::new(s.header.seed, s.header.config.clone());
    let header = header_line(&s.header);
    let mut prev = sha256_hex(header.as_bytes());
    let mut report = RunReport { lines: vec![header], engine: Engine::new(0, Default::default()), stop: None, warnings: vec![] };
    for (i, step) in s.steps.iter().enumerate() {
        let seq = i as u64 + 1;
        if until.is_some_and(|u| seq > u) {
            break;
        }
        let (line, outcome) = record(&mut engine, seq, step, &mut prev);
        report.lines.push(line);
        match outcome {
            StepOutcome::Failed(message) => {
                report.stop = Some(Stop { seq, kind: StopKind::Assertion, message });
                break;
            }
            StepOutcome::Rejected(err) if step.expect_error.is_none() => {
                let message = format!("{}: {err}", err.kind());
                report.stop = Some(Stop { seq, kind: StopKind::Command, message });
                break;
            }
            StepOutcome::Ok(v) if v["partial"] == true => {
                report.warnings.push(Failure { seq, message: format!("partial arbitrage report: {}", v["unquoted"]) });
            }
            _ => {}
        }
    }
    report.engine = engine;
    report
}

pub fn run(s: &Scenario) -> RunReport {
    run_until(s, None)
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("digest mismatch at record {seq}: {detail}")]
    Mismatch { seq: u64, detail: String },
}

impl ReplayError {
    /// Sequence number of the first bad record (0 for the header).
    pub fn seq(&self) -> Option<u64> {
        match self {
            ReplayError::Mismatch { seq, .. } => Some(*seq),
            ReplayError::Malformed { line, .. } => Some(line.saturating_sub(1) as u64),
            ReplayError::Empty => None,
        }
    }
}

#[derive(Debug)]
pub struct Replay {
    pub engine: Engine,
    pub records: u64,
    pub head: String,
}

fn first_difference(expected: &str, found: &str) -> String {
    let (Ok(a), Ok(b)) = (serde_json::from_str::<Value>(expected), serde_json::from_str::<Value>(found)) else {
        return "unparseable record".into();
    };
    let (Some(a), Some(b)) = (a.as_object(), b.as_object()) else {
        return "record is not an object".into();
    };
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let fields: Vec<&str> = keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).map(|k| k.as_str()).collect();
    if fields.is_empty() {
        "formatting".into()
    } else {
        format!("field {}", fields.join(", "))
    }
}

/// Re-executes a log from its header and checks every record byte for byte.
/// Stops after record `until` when given.
pub fn replay_until(text: &str, until: Option<u64>) -> Result<Replay, ReplayError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(ReplayError::Empty)?;
    let malformed = |line: usize, message: String| ReplayError::Malformed { line: line + 1, message };
    let hv: Value = serde_json::from_str(first).map_err(|e| malformed(0, e.to_string()))?;
    if hv["schema"] != LOG_SCHEMA {
        return Err(malformed(0, format!("unsupported schema {}", hv["schema"])));
    }
    let header = Header {
        schema: scenario::SCENARIO_SCHEMA.into(),
        seed: hv["seed"].as_u64().ok_or_else(|| malformed(0, "missing seed".into()))?,
        config: serde_json::from_value(hv["config"].clone()).map_err(|e| malformed(0, e.to_string()))?,
    };
    let expected_header = header_line(&header);
    if expected_header != first {
        return Err(ReplayError::Mismatch { seq: 0, detail: first_difference(&expected_header, first) });
    }
    let mut engine = Engine::new(header.seed, header.config.clone());
    let mut prev = sha256_hex(first.as_bytes());
    let mut seq = 0;
    for (i, line) in lines {
        seq += 1;
        if until.is_some_and(|u| seq > u) {
            break;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| malformed(i, e.to_string()))?;
        let step: Step = serde_json::from_value(v["command"].clone()).map_err(|e| malformed(i, e.to_string()))?;
        let (expected, _) = record(&mut engine, seq, &step, &mut prev);
        if expected != line {
            return Err(ReplayError::Mismatch { seq, detail: first_difference(&expected, line) });
        }
    }
    Ok(Replay { engine, records: seq.min(until.unwrap_or(u64::MAX)), head: prev })
}

pub fn replay(text: &str) -> Result<Replay, ReplayError> {
    replay_until(text, None)
}

/// Balance changes summed over every record of a log.
pub fn net_deltas(text: &str) -> BTreeMap<String, Value> {
    let mut totals: BTreeMap<String, BTreeMap<String, i128>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let Ok(v) = serde_json::from_str::<Value>(line) else { continue };
        let Some(delta) = v["delta"].as_object() else { continue };
        for (acct, d) in delta {
            let t = totals.entry(acct.clone()).or_default();
            for (k, x) in d.as_object().into_iter().flatten() {
                if let Some(n) = x.as_i64() {
                    *t.entry(k.clone()).or_default() += n as i128;
                }
                for (label, y) in x.as_object().into_iter().flatten() {
                    *t.entry(label.clone()).or_default() += y.as_i64().unwrap_or(0) as i128;
                }
            }
        }
    }
    totals.into_iter().map(|(k, v)| (k, json!(v))).collect()
}
