//! The serialized state machine. Every mutating call is atomic: on error the
//! state is restored, and after success the solvency and conservation
//! invariants are re-checked. A failed invariant halts the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::gadgets;
use crate::ids::{AccountId, MarketId};
use crate::ledger::{Ledger, SolvencyReport};
use crate::market::{Market, MarketSpec, Outcome, OutcomeArg, PayoffKind};
use crate::resolution::{PriceSource, Register, Resolution, ResolutionPolicy, TallyReport};
use crate::settlement::{self, RedemptionReceipt, SurplusReport};
use crate::units::{Amount, Price, Qty};
use crate::venue::clob::{self, ArbFlag, ArbKind, ArbReport, Clob, ClobConfig, Cross, IntentMatch, Placed, Position, Side};
use crate::venue::cpmm::{Amm, Swap, SwapSide};
use crate::venue::lmsr::Bookmakers;
use crate::venue::seed::{self, SeededBookmaker};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub clob: ClobConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub tick: u64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArbExecution {
    pub kind: ArbKind,
    pub qty: Qty,
    /// Change in the actor's numeraire balance.
    pub cash_delta: i64,
    /// Payout still to be collected on shares kept (negative-risk ask sets).
    pub held_value: Amount,
    pub profit: i64,
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub tick: u64,
    pub seed: u64,
    pub config: EngineConfig,
    pub ledger: Ledger,
    pub markets: BTreeMap<MarketId, Market>,
    pub clarifications: BTreeMap<MarketId, Vec<Clarification>>,
    pub clob: Clob,
    pub amm: Amm,
    pub lmsr: Bookmakers,
    pub seeded: BTreeMap<MarketId, Vec<SeededBookmaker>>,
    pub resolution: Resolution,
    pub halted: Option<String>,
}

fn user(id: &AccountId) -> Result<()> {
    if id.is_system() {
        return Err(EngineError::ReservedAccount(id.clone()));
    }
    Ok(())
}

impl Engine {
    pub fn new(seed: u64, config: EngineConfig) -> Self {
        Self {
            tick: 0,
            seed,
            clob: Clob::new(config.clob.clone()),
            config,
            ledger: Ledger::default(),
            markets: BTreeMap::new(),
            clarifications: BTreeMap::new(),
            amm: Amm::default(),
            lmsr: Bookmakers::default(),
            seeded: BTreeMap::new(),
            resolution: Resolution::new(seed),
            halted: None,
        }
    }

    fn atomic<T>(&mut self, f: impl FnOnce(&mut Engine) -> Result<T>) -> Result<T> {
        if let Some(why) = &self.halted {
            return Err(EngineError::Halted(why.clone()));
        }
        let backup = self.clone();
        match f(self) {
            Ok(v) => {
                self.observe_prices();
                if let Err(e) = self.check_invariants() {
                    self.halted = Some(e.to_string());
                    return Err(e);
                }
                Ok(v)
            }
            Err(e) => {
                *self = backup;
                Err(e)
            }
        }
    }

    pub fn market(&self, id: &MarketId) -> Result<&Market> {
        self.markets.get(id).ok_or_else(|| EngineError::UnknownMarket(id.clone()))
    }

    fn open_market(&self, id: &MarketId) -> Result<Market> {
        let m = self.market(id)?;
        if self.resolution.outcome(id).is_some() {
            return Err(EngineError::MarketResolved(id.clone()));
        }
        Ok(m.clone())
    }

    pub fn outcome(&self, id: &MarketId) -> Option<&Outcome> {
        self.resolution.outcome(id)
    }

    // invariants

    pub fn solvency(&self) -> Vec<SolvencyReport> {
        self.markets.values().map(|m| self.ledger.solvency(m, self.outcome(m.id()))).collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for r in self.solvency() {
            if !r.solvent {
                return Err(EngineError::InvariantViolation(format!(
                    "market {} holds {} against worst-case claim {}",
                    r.market, r.treasury, r.liability
                )));
            }
        }
        self.ledger.check_conservation()?;
        let violation = |msg: String| Err(EngineError::InvariantViolation(msg));
        if self.ledger.cash(&clob::escrow_account()) != self.clob.escrowed_cash() {
            return violation("order escrow out of sync".into());
        }
        if self.ledger.cash(&clob::intent_account()) != self.clob.escrowed_margin() {
            return violation("intent margin out of sync".into());
        }
        let escrow = clob::escrow_account();
        for m in self.markets.values() {
            for label in m.labels() {
                if self.ledger.shares(&escrow, m.id(), label) != self.clob.escrowed_shares(m.id(), label) {
                    return violation(format!("ask escrow of {}/{label} out of sync", m.id()));
                }
            }
        }
        for (mid, labels) in &self.clob.books {
            for (label, book) in labels {
                if let (Some((bid, _)), Some((ask, _))) = (book.bids.last_key_value(), book.asks.first_key_value()) {
                    if bid >= ask {
                        return violation(format!("book {mid}/{label} left crossed"));
                    }
                }
            }
        }
        for p in self.amm.pools.values() {
            let acct = p.account();
            if self.ledger.cash(&acct) != p.cash || self.ledger.shares(&acct, &p.market, &p.label) != p.shares {
                return violation(format!("pool {} reserves out of sync", p.id));
            }
        }
        Ok(())
    }

    fn observe_prices(&mut self) {
        let now = self.tick;
        let (clob, amm) = (&self.clob, &self.amm);
        for m in self.markets.values() {
            self.resolution.observe_prices(m, now, |source, label| match source {
                PriceSource::Clob => clob.last_trade(m.id(), label),
                PriceSource::Amm => amm.spot_price(m.id(), label),
            });
        }
    }

    fn finish(&mut self, market: &MarketId, outcome: Outcome) -> Result<()> {
        self.resolution.finalize(&mut self.ledger, market, outcome, self.tick)?;
        self.clob.clear_market(&mut self.ledger, market)?;
        self.amm.freeze_market(market);
        Ok(())
    }

    // time and genesis

    /// Moves the logical clock forward, expiring dispute windows and running
    /// auto-resolve checks. Returns markets finalized along the way.
    pub fn advance_to(&mut self, tick: u64) -> Result<Vec<MarketId>> {
        if tick < self.tick {
            return Err(EngineError::TickRegression { current: self.tick, requested: tick });
        }
        if tick == self.tick {
            return Ok(vec![]);
        }
        self.atomic(|e| {
            e.tick = tick;
            let ready = e.resolution.on_advance(&e.ledger, &e.markets, tick)?;
            let mut done = Vec::new();
            for (mid, outcome) in ready {
                e.finish(&mid, outcome)?;
                done.push(mid);
            }
            let ids: Vec<MarketId> = e.markets.keys().cloned().collect();
            for mid in ids {
                let auto = matches!(e.resolution.current_stage(&mid), Ok(crate::resolution::Stage::AutoResolve(_)));
                if auto && e.outcome(&mid).is_none() {
                    let m = e.markets[&mid].clone();
                    e.resolution.auto_check(&m, tick)?;
                }
            }
            Ok(done)
        })
    }

    pub fn faucet(&mut self, to: &AccountId, cash: Amount, gov: Amount) -> Result<()> {
        if self.tick != 0 {
            return Err(EngineError::FaucetAfterGenesis);
        }
        user(to)?;
        self.atomic(|e| {
            e.ledger.mint_cash(to, cash)?;
            e.ledger.mint_gov(to, gov)
        })
    }

    // catalog

    pub fn define_policy(&mut self, policy: ResolutionPolicy) -> Result<()> {
        self.atomic(|e| e.resolution.define_policy(policy))
    }

    pub fn create_market(&mut self, mut spec: MarketSpec) -> Result<MarketId> {
        self.atomic(|e| {
            if e.markets.contains_key(&spec.id) {
                return Err(EngineError::DuplicateMarketId(spec.id.clone()));
            }
            spec.created = e.tick;
            let market = Market::new(spec)?;
            e.resolution.attach(&e.ledger, &market, e.tick)?;
            let id = market.id().clone();
            e.markets.insert(id.clone(), market);
            Ok(id)
        })
    }

    pub fn clarify(&mut self, market: &MarketId, text: &str) -> Result<()> {
        self.atomic(|e| {
            e.market(market)?;
            let tick = e.tick;
            e.clarifications.entry(market.clone()).or_default().push(Clarification { tick, text: text.to_owned() });
            Ok(())
        })
    }

    // transfers

    pub fn transfer_cash(&mut self, from: &AccountId, to: &AccountId, amount: Amount) -> Result<()> {
        user(from)?;
        user(to)?;
        self.atomic(|e| if amount == 0 { Ok(()) } else { e.ledger.transfer_cash(from, to, amount) })
    }

    pub fn transfer_shares(&mut self, from: &AccountId, to: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<()> {
        user(from)?;
        user(to)?;
        self.atomic(|e| {
            e.market(market)?.label_index(label)?;
            if qty == 0 {
                return Ok(());
            }
            e.ledger.transfer_shares(from, to, market, label, qty)
        })
    }

    // gadgets

    pub fn split(&mut self, who: &AccountId, market: &MarketId, bundle: Option<&str>, qty: Qty) -> Result<()> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            gadgets::split(&mut e.ledger, &m, who, bundle, qty)
        })
    }

    pub fn merge(&mut self, who: &AccountId, market: &MarketId, bundle: Option<&str>, qty: Qty) -> Result<()> {
        user(who)?;
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            gadgets::merge(&mut e.ledger, &m, who, bundle, qty)
        })
    }

    /// One NO share of `outcome` into a YES share of every other outcome.
    pub fn convert_no(&mut self, who: &AccountId, market: &MarketId, outcome: &str, qty: Qty) -> Result<()> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            gadgets::convert_no(&mut e.ledger, &m, who, outcome, qty)
        })
    }

    /// NO shares of every outcome but `outcome` into its YES share plus numeraire.
    pub fn convert_no_set(&mut self, who: &AccountId, market: &MarketId, outcome: &str, qty: Qty) -> Result<Amount> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            gadgets::convert_no_all_but(&mut e.ledger, &m, who, outcome, qty)
        })
    }

    // order book

    #[allow(clippy::too_many_arguments)]
    pub fn place_order(&mut self, who: &AccountId, market: &MarketId, label: &str, side: Side, price: Price, qty: Qty) -> Result<Placed> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            e.clob.place_order(&mut e.ledger, &m, who, label, side, price, qty, e.tick)
        })
    }

    pub fn cancel_order(&mut self, who: &AccountId, id: u64) -> Result<()> {
        self.atomic(|e| e.clob.cancel_order(&mut e.ledger, id, Some(who)).map(|_| ()))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn post_intent(&mut self, who: &AccountId, market: &MarketId, bundle: Option<&str>, side: Position, price: Price, qty: Qty) -> Result<u64> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            e.clob.post_intent(&mut e.ledger, &m, who, bundle, side, price, qty, e.tick)
        })
    }

    pub fn cancel_intent(&mut self, who: &AccountId, id: u64) -> Result<()> {
        self.atomic(|e| e.clob.cancel_intent(&mut e.ledger, id, Some(who)).map(|_| ()))
    }

    pub fn match_intents(&mut self, a: u64, b: u64) -> Result<IntentMatch> {
        self.atomic(|e| {
            let mid = e.clob.intents.get(&a).ok_or(EngineError::UnknownOrder(a))?.market.clone();
            let m = e.open_market(&mid)?;
            e.clob.match_intents(&mut e.ledger, &m, a, b)
        })
    }

    pub fn complementary_cross(&mut self, a: u64, b: u64) -> Result<Cross> {
        self.atomic(|e| {
            let mid = e.clob.orders.get(&a).ok_or(EngineError::UnknownOrder(a))?.market.clone();
            let m = e.open_market(&mid)?;
            e.clob.complementary_cross(&mut e.ledger, &m, a, b)
        })
    }

    pub fn detect_arbitrage(&self, market: &MarketId) -> Result<ArbReport> {
        Ok(self.clob.detect_arbitrage(self.market(market)?))
    }

    /// Trades a flagged opportunity through the book and the gadgets.
    pub fn execute_arbitrage(&mut self, who: &AccountId, market: &MarketId, flag: &ArbFlag) -> Result<ArbExecution> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            let before = e.ledger.cash(who) as i64;
            let q = flag.depth;
            let neg_risk_set = m.kind() == PayoffKind::YnbNr && flag.bundle.is_none();
            let tick = e.tick;
            let mut held_value = 0;
            if flag.kind.sells() {
                if neg_risk_set {
                    let first = m.bundles()[0].id.clone();
                    gadgets::split(&mut e.ledger, &m, who, Some(&first), q)?;
                    gadgets::convert_no_set(&mut e.ledger, &m, who, &[first], q)?;
                } else {
                    gadgets::split(&mut e.ledger, &m, who, flag.bundle.as_deref(), q)?;
                }
                for (label, price) in flag.labels.iter().zip(&flag.prices) {
                    e.clob.place_order(&mut e.ledger, &m, who, label, Side::Ask, *price, q, tick)?;
                }
            } else {
                for (label, price) in flag.labels.iter().zip(&flag.prices) {
                    e.clob.place_order(&mut e.ledger, &m, who, label, Side::Bid, *price, q, tick)?;
                }
                if neg_risk_set {
                    held_value = q;
                } else {
                    gadgets::merge(&mut e.ledger, &m, who, flag.bundle.as_deref(), q)?;
                }
            }
            let cash_delta = e.ledger.cash(who) as i64 - before;
            Ok(ArbExecution { kind: flag.kind, qty: q, cash_delta, held_value, profit: cash_delta + held_value as i64 })
        })
    }

    // automated market makers

    pub fn amm_create(&mut self, who: &AccountId, market: &MarketId, label: &str, shares: Qty, cash: Amount, fee_bps: u64) -> Result<String> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            e.amm.create(&mut e.ledger, &m, who, label, shares, cash, fee_bps)
        })
    }

    pub fn amm_swap(&mut self, who: &AccountId, pool: &str, side: SwapSide, amount_in: u64) -> Result<Swap> {
        user(who)?;
        self.atomic(|e| e.amm.swap(&mut e.ledger, pool, who, side, amount_in))
    }

    pub fn amm_add(&mut self, who: &AccountId, pool: &str, shares: Qty, cash: Amount) -> Result<u64> {
        user(who)?;
        self.atomic(|e| e.amm.add_liquidity(&mut e.ledger, pool, who, shares, cash))
    }

    pub fn amm_remove(&mut self, who: &AccountId, pool: &str, lp: u64) -> Result<(Qty, Amount)> {
        user(who)?;
        self.atomic(|e| e.amm.remove_liquidity(&mut e.ledger, pool, who, lp))
    }

    pub fn lmsr_create(&mut self, who: &AccountId, market: &MarketId, b: Amount, bond: Amount) -> Result<()> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            e.lmsr.create(&mut e.ledger, &m, who, b, bond)
        })
    }

    pub fn lmsr_trade(&mut self, who: &AccountId, market: &MarketId, deltas: &BTreeMap<String, i64>) -> Result<i64> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            e.lmsr.trade(&mut e.ledger, &m, who, deltas)
        })
    }

    pub fn seed_bookmaker(&mut self, who: &AccountId, market: &MarketId, capital: Amount, priors: &[f64], fee_bps: u64) -> Result<SeededBookmaker> {
        user(who)?;
        self.atomic(|e| {
            let m = e.open_market(market)?;
            let s = seed::seed_bookmaker(&mut e.ledger, &mut e.amm, &m, who, capital, priors, fee_bps)?;
            e.seeded.entry(market.clone()).or_default().push(s.clone());
            Ok(s)
        })
    }

    // staking and resolution

    pub fn stake(&mut self, who: &AccountId, amount: Amount) -> Result<()> {
        user(who)?;
        self.atomic(|e| e.ledger.stake(who, amount))
    }

    pub fn unstake(&mut self, who: &AccountId, amount: Amount) -> Result<()> {
        user(who)?;
        self.atomic(|e| {
            if e.resolution.stake_locked(who) {
                return Err(EngineError::StakeLocked(who.clone()));
            }
            e.ledger.unstake(who, amount)
        })
    }

    pub fn fund_pot(&mut self, who: &AccountId, market: &MarketId, amount: Amount) -> Result<()> {
        user(who)?;
        self.atomic(|e| e.resolution.fund_pot(&mut e.ledger, market, who, amount))
    }

    pub fn propose(&mut self, who: &AccountId, market: &MarketId, outcome: &OutcomeArg, bond: Amount) -> Result<u64> {
        user(who)?;
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            e.resolution.propose(&mut e.ledger, &m, who, outcome, bond, e.tick)
        })
    }

    pub fn dispute(&mut self, who: &AccountId, proposal: u64, bond: Amount) -> Result<usize> {
        user(who)?;
        self.atomic(|e| e.resolution.dispute(&mut e.ledger, proposal, who, bond, e.tick))
    }

    pub fn auto_check(&mut self, market: &MarketId) -> Result<Option<u64>> {
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            e.resolution.auto_check(&m, e.tick)
        })
    }

    pub fn arbiter_resolve(&mut self, who: &AccountId, market: &MarketId, outcome: &OutcomeArg) -> Result<Option<Outcome>> {
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            let decided = e.resolution.arbiter(&m, who, outcome, e.tick)?;
            if let Some(o) = &decided {
                e.finish(market, o.clone())?;
            }
            Ok(decided)
        })
    }

    pub fn commit_vote(&mut self, who: &AccountId, market: &MarketId, digest: &str) -> Result<()> {
        self.atomic(|e| e.resolution.commit(market, who, digest, e.tick))
    }

    /// A reveal that does not match its commitment voids the ballot (that
    /// change is kept) and reports `DigestMismatch`.
    pub fn reveal_vote(&mut self, who: &AccountId, market: &MarketId, outcome: &str, salt: &str) -> Result<()> {
        let valid = self.atomic(|e| {
            let m = e.market(market)?.clone();
            e.resolution.reveal(&m, who, outcome, salt, e.tick)
        })?;
        if !valid {
            return Err(EngineError::DigestMismatch);
        }
        Ok(())
    }

    pub fn cast_vote(&mut self, who: &AccountId, market: &MarketId, outcome: &OutcomeArg) -> Result<()> {
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            e.resolution.cast_vote(&m, who, outcome, e.tick)
        })
    }

    pub fn tally(&mut self, market: &MarketId) -> Result<TallyReport> {
        self.atomic(|e| {
            let (report, decided) = e.resolution.tally(&mut e.ledger, market, e.tick)?;
            if let Some(o) = decided {
                e.finish(market, o)?;
            }
            Ok(report)
        })
    }

    // settlement

    pub fn redeem(&mut self, who: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<RedemptionReceipt> {
        user(who)?;
        self.atomic(|e| {
            let m = e.market(market)?.clone();
            let o = settlement::require_resolved(market, e.outcome(market))?.clone();
            settlement::redeem(&mut e.ledger, &m, &o, who, label, qty)
        })
    }

    pub fn surplus_report(&self, market: &MarketId) -> Result<SurplusReport> {
        let m = self.market(market)?;
        let o = settlement::require_resolved(market, self.outcome(market))?;
        Ok(settlement::surplus_report(&self.ledger, m, o))
    }

    pub fn register(&self, market: &MarketId) -> Result<&Register> {
        self.resolution.register(market).ok_or_else(|| EngineError::UnknownMarket(market.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::SCALE;

    const U: u64 = SCALE;

    fn a(s: &str) -> AccountId {
        AccountId::from(s)
    }

    fn engine() -> Engine {
        let mut e = Engine::new(7, EngineConfig::default());
        e.faucet(&a("alice"), 1_000 * U, 0).unwrap();
        e.faucet(&a("bob"), 1_000 * U, 0).unwrap();
        e.define_policy(ResolutionPolicy::arbiter("judge", "judge")).unwrap();
        e.create_market(MarketSpec::binary("hal", "judge")).unwrap();
        e
    }

    #[test]
    fn failed_op_leaves_state_untouched() {
        let mut e = engine();
        let before = e.ledger.clone();
        let err = e.split(&a("alice"), &"hal".into(), None, 2_000 * U).unwrap_err();
        assert!(matches!(err, EngineError::InsufficientFunds { .. }));
        assert_eq!(e.ledger, before);
    }

    #[test]
    fn faucet_only_at_genesis() {
        let mut e = engine();
        e.advance_to(1).unwrap();
        assert_eq!(e.faucet(&a("alice"), 1, 0).unwrap_err(), EngineError::FaucetAfterGenesis);
        assert!(matches!(e.advance_to(0), Err(EngineError::TickRegression { .. })));
    }

    #[test]
    fn resolution_clears_orders_and_blocks_trading() {
        let mut e = engine();
        let hal = MarketId::from("hal");
        e.split(&a("bob"), &hal, None, 10 * U).unwrap();
        e.place_order(&a("bob"), &hal, "YES", Side::Ask, 400_000, 5 * U).unwrap();
        e.place_order(&a("alice"), &hal, "YES", Side::Bid, 300_000, 5 * U).unwrap();
        e.arbiter_resolve(&a("judge"), &hal, &"False".into()).unwrap();
        assert!(e.clob.orders.is_empty());
        assert_eq!(e.ledger.cash(&a("alice")), 1_000 * U);
        assert_eq!(e.ledger.shares(&a("bob"), &hal, "YES"), 10 * U);
        assert!(matches!(e.split(&a("bob"), &hal, None, U), Err(EngineError::MarketResolved(_))));
        assert_eq!(e.redeem(&a("bob"), &hal, "NO", 10 * U).unwrap().paid, 10 * U);
        assert!(matches!(
            e.arbiter_resolve(&a("judge"), &hal, &"True".into()),
            Err(EngineError::AlreadyResolved(_))
        ));
    }

    #[test]
    fn redeem_before_resolution_fails() {
        let mut e = engine();
        let hal = MarketId::from("hal");
        e.split(&a("bob"), &hal, None, U).unwrap();
        assert_eq!(e.redeem(&a("bob"), &hal, "NO", U).unwrap_err(), EngineError::NotResolved(hal));
    }

    #[test]
    fn system_accounts_are_reserved() {
        let mut e = engine();
        let err = e.transfer_cash(&a("alice"), &a("@clob"), 1).unwrap_err();
        assert_eq!(err, EngineError::ReservedAccount(a("@clob")));
    }
}
