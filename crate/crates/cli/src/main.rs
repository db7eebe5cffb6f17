use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use depm_core::engine::Engine;
use depm_core::log::{self, ReplayError, StopKind};
use depm_core::scenario::Scenario;
use depm_core::snapshot::{canonical, snapshot};
use depm_core::MarketId;
use serde_json::json;

const EXIT_ASSERTION: u8 = 2;
const EXIT_COMMAND: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_DIGEST: u8 = 5;

#[derive(Parser)]
#[command(name = "depm", version, about = "Run, replay and inspect prediction-market scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario and write its event log.
    Run {
        scenario: PathBuf,
        /// Log destination; stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Treat warnings (partial arbitrage scans) as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Re-execute a log and verify every record.
    Replay { log: PathBuf },
    /// Print the state after record `--at` (default: the end).
    Snapshot {
        input: PathBuf,
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        pretty: bool,
    },
    /// Report collateral against worst-case liability for every market.
    CheckSolvency { input: PathBuf },
    /// List arbitrage flags from the order books.
    ArbScan {
        input: PathBuf,
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        market: Option<String>,
        /// Fail when a scan is partial.
        #[arg(long)]
        strict: bool,
    },
    /// Print the hash-chain head of a log.
    Digest { log: PathBuf },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads engine state from a scenario or a log, up to record `at`.
fn load(path: &Path, at: Option<u64>) -> anyhow::Result<Result<Engine, ReplayError>> {
    let text = read(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).unwrap_or("");
    if first.contains(log::LOG_SCHEMA) {
        return Ok(log::replay_until(&text, at).map(|r| r.engine));
    }
    let s = Scenario::parse(&text)?;
    Ok(Ok(log::run_until(&s, at).engine))
}

fn replay_failed(e: &ReplayError) -> ExitCode {
    eprintln!("replay failed: {e}");
    ExitCode::from(EXIT_DIGEST)
}

fn main() -> ExitCode {
    // Usage errors share the parse exit code; clap's default of 2 means "assertion" here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Run { scenario, log: out, strict } => {
            let s = Scenario::parse(&read(&scenario)?)?;
            let report = log::run(&s);
            match &out {
                Some(p) => fs::write(p, report.log_text()).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", report.log_text()),
            }
            for w in &report.warnings {
                eprintln!("record {}: warning: {}", w.seq, w.message);
            }
            eprintln!("{} records, head {}", report.lines.len() - 1, report.head());
            if let Some(stop) = &report.stop {
                let (what, code) = match stop.kind {
                    StopKind::Assertion => ("assertion failed", EXIT_ASSERTION),
                    StopKind::Command => ("command error", EXIT_COMMAND),
                };
                eprintln!("record {}: {what}: {}", stop.seq, stop.message);
                return Ok(ExitCode::from(code));
            }
            if strict && !report.warnings.is_empty() {
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay { log: path } => match log::replay(&read(&path)?) {
            Ok(r) => {
                println!("ok: {} records verified, head {}", r.records, r.head);
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => Ok(replay_failed(&e)),
        },
        Cmd::Snapshot { input, at, pretty } => {
            let engine = match load(&input, at)? {
                Ok(e) => e,
                Err(e) => return Ok(replay_failed(&e)),
            };
            let v = snapshot(&engine);
            if pretty {
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("{}", canonical(&v));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::CheckSolvency { input } => {
            let engine = match load(&input, None)? {
                Ok(e) => e,
                Err(e) => return Ok(replay_failed(&e)),
            };
            let reports = engine.solvency();
            let conservation = engine.ledger.check_conservation().err().map(|e| e.to_string());
            println!("{}", canonical(&json!({ "markets": reports, "conservation_error": conservation })));
            if reports.iter().any(|r| !r.solvent) || conservation.is_some() {
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ArbScan { input, at, market, strict } => {
            let engine = match load(&input, at)? {
                Ok(e) => e,
                Err(e) => return Ok(replay_failed(&e)),
            };
            let ids: Vec<MarketId> = match market {
                Some(m) => vec![MarketId::from(m)],
                None => engine.markets.keys().cloned().collect(),
            };
            let mut partial = false;
            for id in ids {
                let report = engine.detect_arbitrage(&id)?;
                partial |= report.partial;
                println!("{}", canonical(&serde_json::to_value(report)?));
            }
            if strict && partial {
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Digest { log: path } => {
            let text = read(&path)?;
            let last = text.lines().rfind(|l| !l.trim().is_empty()).unwrap_or("");
            let v: serde_json::Value = serde_json::from_str(last).context("last log line")?;
            match v["chain"].as_str() {
                Some(head) => println!("{head}"),
                None if v["schema"] == log::LOG_SCHEMA => println!("{}", depm_core::snapshot::sha256_hex(last.as_bytes())),
                None => bail!("not an event log"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
