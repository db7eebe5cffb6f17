//! Scenario files: a JSON header line followed by one command per line.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{Engine, EngineConfig};
use crate::error::EngineError;
use crate::ids::{AccountId, MarketId};
use crate::market::{MarketSpec, OutcomeArg};
use crate::resolution::vote::ballot_digest;
use crate::resolution::ResolutionPolicy;
use crate::snapshot;
use crate::units::{Amount, Price, Qty};
use crate::venue::clob::{ArbKind, Position, Side};
use crate::venue::cpmm::SwapSide;

pub const SCENARIO_SCHEMA: &str = "depm-scenario/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: EngineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum Command {
    Tick {
        #[serde(default)]
        to: Option<u64>,
        #[serde(default)]
        by: Option<u64>,
    },
    Faucet {
        account: AccountId,
        #[serde(default)]
        cash: Amount,
        #[serde(default)]
        gov: Amount,
    },
    DefinePolicy {
        policy: ResolutionPolicy,
    },
    CreateMarket {
        market: MarketSpec,
    },
    Clarify {
        market: MarketId,
        text: String,
    },
    TransferCash {
        from: AccountId,
        to: AccountId,
        amount: Amount,
    },
    TransferShares {
        from: AccountId,
        to: AccountId,
        market: MarketId,
        label: String,
        qty: Qty,
    },
    Split {
        actor: AccountId,
        market: MarketId,
        #[serde(default)]
        bundle: Option<String>,
        qty: Qty,
    },
    Merge {
        actor: AccountId,
        market: MarketId,
        #[serde(default)]
        bundle: Option<String>,
        qty: Qty,
    },
    /// NO of `outcome` into YES of every other outcome.
    NrNo {
        actor: AccountId,
        market: MarketId,
        outcome: String,
        qty: Qty,
    },
    /// NO of every other outcome into YES of `outcome` plus numeraire.
    NrNoSet {
        actor: AccountId,
        market: MarketId,
        outcome: String,
        qty: Qty,
    },
    Order {
        actor: AccountId,
        market: MarketId,
        label: String,
        side: Side,
        price: Price,
        qty: Qty,
    },
    Cancel {
        actor: AccountId,
        order: u64,
    },
    Intent {
        actor: AccountId,
        market: MarketId,
        #[serde(default)]
        bundle: Option<String>,
        side: Position,
        price: Price,
        qty: Qty,
    },
    CancelIntent {
        actor: AccountId,
        intent: u64,
    },
    MatchIntents {
        a: u64,
        b: u64,
    },
    Cross {
        a: u64,
        b: u64,
    },
    ArbScan {
        market: MarketId,
    },
    /// Executes the `index`-th flag of a fresh scan.
    ArbExecute {
        actor: AccountId,
        market: MarketId,
        #[serde(default)]
        index: usize,
    },
    AmmCreate {
        actor: AccountId,
        market: MarketId,
        label: String,
        shares: Qty,
        cash: Amount,
        #[serde(default)]
        fee_bps: u64,
    },
    AmmSwap {
        actor: AccountId,
        pool: String,
        side: SwapSide,
        amount: u64,
    },
    AmmAdd {
        actor: AccountId,
        pool: String,
        shares: Qty,
        cash: Amount,
    },
    AmmRemove {
        actor: AccountId,
        pool: String,
        lp: u64,
    },
    LmsrCreate {
        actor: AccountId,
        market: MarketId,
        b: Amount,
        bond: Amount,
    },
    LmsrTrade {
        actor: AccountId,
        market: MarketId,
        deltas: BTreeMap<String, i64>,
    },
    Seed {
        actor: AccountId,
        market: MarketId,
        capital: Amount,
        priors: Vec<f64>,
        #[serde(default)]
        fee_bps: u64,
    },
    Stake {
        actor: AccountId,
        amount: Amount,
    },
    Unstake {
        actor: AccountId,
        amount: Amount,
    },
    FundPot {
        actor: AccountId,
        market: MarketId,
        amount: Amount,
    },
    Propose {
        actor: AccountId,
        market: MarketId,
        outcome: OutcomeArg,
        bond: Amount,
    },
    Dispute {
        actor: AccountId,
        proposal: u64,
        bond: Amount,
    },
    AutoCheck {
        market: MarketId,
    },
    Arbiter {
        actor: AccountId,
        market: MarketId,
        outcome: OutcomeArg,
    },
    /// Either `digest` or the pair `outcome`/`salt` (hashed here) is given.
    Commit {
        actor: AccountId,
        market: MarketId,
        #[serde(default)]
        digest: Option<String>,
        #[serde(default)]
        outcome: Option<String>,
        #[serde(default)]
        salt: Option<String>,
    },
    Reveal {
        actor: AccountId,
        market: MarketId,
        outcome: String,
        salt: String,
    },
    Vote {
        actor: AccountId,
        market: MarketId,
        outcome: OutcomeArg,
    },
    Tally {
        market: MarketId,
    },
    Redeem {
        actor: AccountId,
        market: MarketId,
        label: String,
        qty: Qty,
    },
    Snapshot,
    Assert(Check),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    Cash { account: AccountId, eq: Amount },
    Gov { account: AccountId, eq: Amount },
    Staked { account: AccountId, eq: Amount },
    Shares { account: AccountId, market: MarketId, label: String, eq: Qty },
    Supply { market: MarketId, label: String, eq: Qty },
    Resolved { market: MarketId, outcome: String },
    Unresolved { market: MarketId },
    Stage { market: MarketId, stage: String },
    Solvent,
    Arbitrage { market: MarketId, kinds: Vec<ArbKind> },
    /// Bounds on a quoted price: last CLOB trade, AMM spot or LMSR marginal price.
    Price {
        market: MarketId,
        label: String,
        venue: PriceVenue,
        #[serde(default)]
        min: Option<Price>,
        #[serde(default)]
        max: Option<Price>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceVenue {
    Clob,
    Amm,
    Lmsr,
}

/// One scenario line. `tick` moves the clock before the command runs;
/// `expect_error` names the error kind the command must fail with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    #[serde(flatten)]
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub header: Header,
    pub steps: Vec<Step>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Line { line: usize, column: usize, message: String },
    #[error("unsupported schema {0:?}")]
    Schema(String),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut header = None;
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |e: serde_json::Error| ParseError::Line { line: i + 1, column: e.column(), message: e.to_string() };
            if header.is_none() {
                let h: Header = serde_json::from_str(line).map_err(err)?;
                if h.schema != SCENARIO_SCHEMA {
                    return Err(ParseError::Schema(h.schema));
                }
                header = Some(h);
            } else {
                steps.push(serde_json::from_str(line).map_err(err)?);
            }
        }
        // A file with no header at all is the empty scenario.
        let header = header.unwrap_or(Header { schema: SCENARIO_SCHEMA.into(), seed: 0, config: EngineConfig::default() });
        Ok(Self { header, steps })
    }
}

/// How a single step ended.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Ok(Value),
    Rejected(EngineError),
    /// An assertion or `expect_error` did not hold.
    Failed(String),
}

fn value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("engine results serialize")
}

fn advance(e: &mut Engine, tick: Option<u64>) -> Result<(), EngineError> {
    match tick {
        Some(t) if t < e.tick => Err(EngineError::TickRegression { current: e.tick, requested: t }),
        Some(t) => e.advance_to(t).map(|_| ()),
        None => Ok(()),
    }
}

pub fn execute(e: &mut Engine, step: &Step) -> StepOutcome {
    let applied = advance(e, step.tick).map_err(ApplyError::Engine).and_then(|_| apply(e, &step.command));
    let outcome = match applied {
        Ok(v) => v,
        Err(ApplyError::Engine(err)) => StepOutcome::Rejected(err),
        Err(ApplyError::Check(msg)) => return StepOutcome::Failed(msg),
    };
    match (&step.expect_error, &outcome) {
        (None, _) => outcome,
        (Some(kind), StepOutcome::Rejected(err)) if err.kind() == *kind => outcome,
        (Some(kind), StepOutcome::Rejected(err)) => StepOutcome::Failed(format!("expected {kind}, got {}: {err}", err.kind())),
        (Some(kind), _) => StepOutcome::Failed(format!("expected {kind}, command succeeded")),
    }
}

enum ApplyError {
    Engine(EngineError),
    Check(String),
}

impl From<EngineError> for ApplyError {
    fn from(e: EngineError) -> Self {
        ApplyError::Engine(e)
    }
}

fn apply(e: &mut Engine, cmd: &Command) -> Result<StepOutcome, ApplyError> {
    use Command as C;
    let v = match cmd {
        C::Tick { to, by } => {
            let target = match (to, by) {
                (Some(t), None) => *t,
                (None, Some(b)) => e.tick.checked_add(*b).ok_or(EngineError::Overflow)?,
                (None, None) => e.tick,
                _ => return Err(EngineError::InvalidAmount("tick takes `to` or `by`, not both".into()).into()),
            };
            value(e.advance_to(target)?)
        }
        C::Faucet { account, cash, gov } => value(e.faucet(account, *cash, *gov)?),
        C::DefinePolicy { policy } => value(e.define_policy(policy.clone())?),
        C::CreateMarket { market } => value(e.create_market(market.clone())?),
        C::Clarify { market, text } => value(e.clarify(market, text)?),
        C::TransferCash { from, to, amount } => value(e.transfer_cash(from, to, *amount)?),
        C::TransferShares { from, to, market, label, qty } => value(e.transfer_shares(from, to, market, label, *qty)?),
        C::Split { actor, market, bundle, qty } => value(e.split(actor, market, bundle.as_deref(), *qty)?),
        C::Merge { actor, market, bundle, qty } => value(e.merge(actor, market, bundle.as_deref(), *qty)?),
        C::NrNo { actor, market, outcome, qty } => value(e.convert_no(actor, market, outcome, *qty)?),
        C::NrNoSet { actor, market, outcome, qty } => json!({ "cash": e.convert_no_set(actor, market, outcome, *qty)? }),
        C::Order { actor, market, label, side, price, qty } => value(e.place_order(actor, market, label, *side, *price, *qty)?),
        C::Cancel { actor, order } => value(e.cancel_order(actor, *order)?),
        C::Intent { actor, market, bundle, side, price, qty } => {
            json!({ "intent": e.post_intent(actor, market, bundle.as_deref(), *side, *price, *qty)? })
        }
        C::CancelIntent { actor, intent } => value(e.cancel_intent(actor, *intent)?),
        C::MatchIntents { a, b } => value(e.match_intents(*a, *b)?),
        C::Cross { a, b } => value(e.complementary_cross(*a, *b)?),
        C::ArbScan { market } => value(e.detect_arbitrage(market)?),
        C::ArbExecute { actor, market, index } => {
            let report = e.detect_arbitrage(market)?;
            let flag = report
                .flags
                .get(*index)
                .ok_or_else(|| EngineError::InvalidAmount(format!("no arbitrage flag {index} on {market}")))?;
            value(e.execute_arbitrage(actor, market, flag)?)
        }
        C::AmmCreate { actor, market, label, shares, cash, fee_bps } => {
            json!({ "pool": e.amm_create(actor, market, label, *shares, *cash, *fee_bps)? })
        }
        C::AmmSwap { actor, pool, side, amount } => value(e.amm_swap(actor, pool, *side, *amount)?),
        C::AmmAdd { actor, pool, shares, cash } => json!({ "lp": e.amm_add(actor, pool, *shares, *cash)? }),
        C::AmmRemove { actor, pool, lp } => {
            let (shares, cash) = e.amm_remove(actor, pool, *lp)?;
            json!({ "shares": shares, "cash": cash })
        }
        C::LmsrCreate { actor, market, b, bond } => value(e.lmsr_create(actor, market, *b, *bond)?),
        C::LmsrTrade { actor, market, deltas } => json!({ "cost": e.lmsr_trade(actor, market, deltas)? }),
        C::Seed { actor, market, capital, priors, fee_bps } => value(e.seed_bookmaker(actor, market, *capital, priors, *fee_bps)?),
        C::Stake { actor, amount } => value(e.stake(actor, *amount)?),
        C::Unstake { actor, amount } => value(e.unstake(actor, *amount)?),
        C::FundPot { actor, market, amount } => value(e.fund_pot(actor, market, *amount)?),
        C::Propose { actor, market, outcome, bond } => json!({ "proposal": e.propose(actor, market, outcome, *bond)? }),
        C::Dispute { actor, proposal, bond } => json!({ "stage": e.dispute(actor, *proposal, *bond)? }),
        C::AutoCheck { market } => json!({ "proposal": e.auto_check(market)? }),
        C::Arbiter { actor, market, outcome } => json!({ "final": e.arbiter_resolve(actor, market, outcome)? }),
        C::Commit { actor, market, digest, outcome, salt } => {
            let digest = match (digest, outcome, salt) {
                (Some(d), None, None) => d.clone(),
                (None, Some(o), Some(s)) => ballot_digest(o, s, actor.as_str()),
                _ => return Err(EngineError::InvalidAmount("commit needs a digest or an outcome and salt".into()).into()),
            };
            e.commit_vote(actor, market, &digest)?;
            json!({ "digest": digest })
        }
        C::Reveal { actor, market, outcome, salt } => value(e.reveal_vote(actor, market, outcome, salt)?),
        C::Vote { actor, market, outcome } => value(e.cast_vote(actor, market, outcome)?),
        C::Tally { market } => value(e.tally(market)?),
        C::Redeem { actor, market, label, qty } => value(e.redeem(actor, market, label, *qty)?),
        C::Snapshot => json!({ "digest": snapshot::snapshot_digest(e) }),
        C::Assert(check) => return evaluate(e, check).map(StepOutcome::Ok).map_err(ApplyError::Check),
    };
    Ok(StepOutcome::Ok(v))
}

fn expect_eq<T: PartialEq + std::fmt::Debug + Serialize>(what: &str, got: T, want: T) -> Result<Value, String> {
    if got == want {
        Ok(json!({ "holds": what }))
    } else {
        Err(format!("{what}: expected {want:?}, found {got:?}"))
    }
}

fn evaluate(e: &Engine, check: &Check) -> Result<Value, String> {
    match check {
        Check::Cash { account, eq } => expect_eq(&format!("cash of {account}"), e.ledger.cash(account), *eq),
        Check::Gov { account, eq } => expect_eq(&format!("gov of {account}"), e.ledger.gov(account), *eq),
        Check::Staked { account, eq } => expect_eq(&format!("stake of {account}"), e.ledger.staked(account), *eq),
        Check::Shares { account, market, label, eq } => {
            expect_eq(&format!("{market}/{label} held by {account}"), e.ledger.shares(account, market, label), *eq)
        }
        Check::Supply { market, label, eq } => expect_eq(&format!("supply of {market}/{label}"), e.ledger.supply(market, label), *eq),
        Check::Resolved { market, outcome } => {
            let got = e.outcome(market).map(|o| o.to_string());
            expect_eq(&format!("outcome of {market}"), got, Some(outcome.clone()))
        }
        Check::Unresolved { market } => expect_eq(&format!("outcome of {market}"), e.outcome(market).map(|o| o.to_string()), None),
        Check::Stage { market, stage } => {
            let got = e.resolution.current_stage(market).map(|s| s.name().to_owned()).map_err(|x| x.to_string())?;
            expect_eq(&format!("stage of {market}"), got, stage.clone())
        }
        Check::Solvent => {
            let bad: Vec<String> = e.solvency().into_iter().filter(|r| !r.solvent).map(|r| r.market.to_string()).collect();
            expect_eq("insolvent markets", bad, vec![])
        }
        Check::Arbitrage { market, kinds } => {
            let report = e.detect_arbitrage(market).map_err(|x| x.to_string())?;
            let mut got: Vec<ArbKind> = report.flags.iter().map(|f| f.kind).collect();
            got.sort();
            let mut want = kinds.clone();
            want.sort();
            expect_eq(&format!("arbitrage flags on {market}"), got, want)
        }
        Check::Price { market, label, venue, min, max } => {
            let p = match venue {
                PriceVenue::Clob => e.clob.last_trade(market, label),
                PriceVenue::Amm => e.amm.spot_price(market, label),
                PriceVenue::Lmsr => e
                    .lmsr
                    .get(market)
                    .ok()
                    .and_then(|b| b.price(label))
                    .map(|x| crate::units::round_half_even(x * crate::units::SCALE as f64) as Price),
            };
            let Some(p) = p else {
                return Err(format!("no {venue:?} price for {market}/{label}"));
            };
            if min.is_some_and(|m| p < m) || max.is_some_and(|m| p > m) {
                return Err(format!("{venue:?} price of {market}/{label} is {p}, outside [{min:?}, {max:?}]"));
            }
            Ok(json!({ "price": p }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_steps_and_comments() {
        let text = r#"{"schema":"depm-scenario/1","seed":9}
# genesis
{"verb":"faucet","account":"alice","cash":5}

{"verb":"tick","tick":1,"by":2,"expect_error":"TickRegression"}
{"verb":"assert","check":"cash","account":"alice","eq":5}
{"verb":"snapshot"}
"#;
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.header.seed, 9);
        assert_eq!(s.steps.len(), 4);
        assert_eq!(s.steps[1].expect_error.as_deref(), Some("TickRegression"));
        assert!(matches!(s.steps[2].command, Command::Assert(Check::Cash { eq: 5, .. })));
        let back: Step = serde_json::from_value(serde_json::to_value(&s.steps[1]).unwrap()).unwrap();
        assert_eq!(back, s.steps[1]);
    }

    #[test]
    fn bad_lines_report_their_number() {
        let err = Scenario::parse("{\"schema\":\"depm-scenario/1\"}\n{\"op\":\"nope\"}").unwrap_err();
        assert!(matches!(err, ParseError::Line { line: 2, .. }));
        assert!(Scenario::parse("# nothing").unwrap().steps.is_empty());
        assert!(matches!(Scenario::parse("{\"schema\":\"x\"}"), Err(ParseError::Schema(_))));
    }

    #[test]
    fn expect_error_must_match() {
        let mut e = Engine::new(0, EngineConfig::default());
        let step = |json: &str| -> Step { serde_json::from_str(json).unwrap() };
        let s = step(r#"{"verb":"transfer_cash","from":"a","to":"b","amount":1,"expect_error":"InsufficientFunds"}"#);
        assert!(matches!(execute(&mut e, &s), StepOutcome::Rejected(_)));
        let s = step(r#"{"verb":"transfer_cash","from":"a","to":"b","amount":1,"expect_error":"Overflow"}"#);
        assert!(matches!(execute(&mut e, &s), StepOutcome::Failed(_)));
        let s = step(r#"{"verb":"assert","check":"cash","account":"a","eq":1}"#);
        assert!(matches!(execute(&mut e, &s), StepOutcome::Failed(_)));
    }
}
