//! Per-market resolution registers driven through a chain of stages:
//! auto-resolve, optimistic proposals, arbiters and stake-weighted votes.

pub mod policy;
pub mod vote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{sys, AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::{Market, Outcome, OutcomeArg};
use crate::units::{mul_div_floor, Amount, Price};

pub use policy::{AutoResolveRule, Electorate, PriceSource, ResolutionPolicy, Secrecy, Stage, VoteParams};
pub use vote::{ballot_digest, TallyVerdict, VoteRound};

use policy::PPM;

pub fn oracle_account(market: &MarketId) -> AccountId {
    sys(format!("oracle/{market}"))
}

pub fn pot_account(market: &MarketId, round: u32) -> AccountId {
    sys(format!("pot/{market}/{round}"))
}

pub fn auto_account() -> AccountId {
    sys("auto")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Register {
    Unresolved,
    Resolved { outcome: Outcome, at: u64 },
}

impl Register {
    pub fn outcome(&self) -> Option<&Outcome> {
        match self {
            Register::Unresolved => None,
            Register::Resolved { outcome, .. } => Some(outcome),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Disputed { disputer: AccountId, bond: Amount },
    Accepted,
    Settled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub market: MarketId,
    pub stage: usize,
    pub proposer: AccountId,
    pub outcome: Outcome,
    pub bond: Amount,
    /// Bond a disputer must post.
    pub dispute_bond: Amount,
    pub opened: u64,
    pub deadline: u64,
    pub status: ProposalStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketResolution {
    pub policy: String,
    pub stage: usize,
    pub stage_entered: u64,
    pub register: Register,
    pub pending: Option<u64>,
    pub proposals: Vec<u64>,
    pub round: Option<VoteRound>,
    pub rounds: u32,
    /// Tick since which each label's price has stayed at or above the threshold.
    pub above_since: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyReport {
    pub round: u32,
    pub verdict: Option<TallyVerdict>,
    pub weights: BTreeMap<String, Amount>,
    pub slashed: BTreeMap<AccountId, Amount>,
    pub rewards: BTreeMap<AccountId, Amount>,
    /// Stage entered after a failed round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escalated_to: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub seed: u64,
    pub policies: BTreeMap<String, ResolutionPolicy>,
    pub markets: BTreeMap<MarketId, MarketResolution>,
    pub proposals: BTreeMap<u64, Proposal>,
    next_proposal: u64,
}

fn stakers(ledger: &Ledger) -> BTreeMap<AccountId, Amount> {
    ledger
        .accounts
        .iter()
        .filter(|(id, a)| a.staked > 0 && !id.is_system())
        .map(|(id, a)| (id.clone(), a.staked))
        .collect()
}

impl Resolution {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn define_policy(&mut self, policy: ResolutionPolicy) -> Result<()> {
        policy.validate()?;
        if self.policies.contains_key(&policy.id) {
            return Err(EngineError::DuplicatePolicy(policy.id));
        }
        self.policies.insert(policy.id.clone(), policy);
        Ok(())
    }

    pub fn market(&self, id: &MarketId) -> Result<&MarketResolution> {
        self.markets.get(id).ok_or_else(|| EngineError::UnknownMarket(id.clone()))
    }

    fn market_mut(&mut self, id: &MarketId) -> Result<&mut MarketResolution> {
        self.markets.get_mut(id).ok_or_else(|| EngineError::UnknownMarket(id.clone()))
    }

    pub fn register(&self, id: &MarketId) -> Option<&Register> {
        self.markets.get(id).map(|m| &m.register)
    }

    pub fn outcome(&self, id: &MarketId) -> Option<&Outcome> {
        self.register(id).and_then(Register::outcome)
    }

    pub fn current_stage(&self, id: &MarketId) -> Result<&Stage> {
        let m = self.market(id)?;
        Ok(&self.policies[&m.policy].stages[m.stage])
    }

    fn unresolved(&self, id: &MarketId) -> Result<&MarketResolution> {
        let m = self.market(id)?;
        if m.register != Register::Unresolved {
            return Err(EngineError::AlreadyResolved(id.clone()));
        }
        Ok(m)
    }

    pub fn check_policy(&self, policy: &str) -> Result<()> {
        if !self.policies.contains_key(policy) {
            return Err(EngineError::UnknownPolicy(policy.to_owned()));
        }
        Ok(())
    }

    pub fn attach(&mut self, ledger: &Ledger, market: &Market, now: u64) -> Result<()> {
        self.check_policy(&market.spec.resolution_policy)?;
        self.markets.insert(
            market.id().clone(),
            MarketResolution {
                policy: market.spec.resolution_policy.clone(),
                stage: 0,
                stage_entered: now,
                register: Register::Unresolved,
                pending: None,
                proposals: Vec::new(),
                round: None,
                rounds: 0,
                above_since: BTreeMap::new(),
            },
        );
        self.enter_stage(ledger, market.id(), 0, now)
    }

    fn enter_stage(&mut self, ledger: &Ledger, id: &MarketId, stage: usize, now: u64) -> Result<()> {
        let seed = self.seed;
        let m = self.markets.get_mut(id).expect("attached market");
        let policy = &self.policies[&m.policy];
        m.stage = stage;
        m.stage_entered = now;
        m.above_since.clear();
        m.pending = None;
        if let Stage::Vote(params) = &policy.stages[stage] {
            m.rounds += 1;
            m.round = Some(VoteRound::open(m.rounds, stage, params, &stakers(ledger), seed, id, now));
        }
        Ok(())
    }

    fn new_proposal(
        &mut self,
        id: &MarketId,
        proposer: &AccountId,
        outcome: Outcome,
        bond: Amount,
        dispute_bond: Amount,
        window: u64,
        now: u64,
    ) -> u64 {
        self.next_proposal += 1;
        let pid = self.next_proposal;
        let m = self.markets.get_mut(id).expect("attached market");
        self.proposals.insert(
            pid,
            Proposal {
                id: pid,
                market: id.clone(),
                stage: m.stage,
                proposer: proposer.clone(),
                outcome,
                bond,
                dispute_bond,
                opened: now,
                deadline: now + window,
                status: ProposalStatus::Pending,
            },
        );
        m.pending = Some(pid);
        m.proposals.push(pid);
        pid
    }

    /// Bonded assertion of the outcome during an optimistic stage.
    pub fn propose(&mut self, ledger: &mut Ledger, market: &Market, proposer: &AccountId, outcome: &OutcomeArg, bond: Amount, now: u64) -> Result<u64> {
        let m = self.unresolved(market.id())?;
        let Stage::Optimistic { bond: required, window } = self.policies[&m.policy].stages[m.stage].clone() else {
            return Err(EngineError::WrongStage);
        };
        if m.pending.is_some() {
            return Err(EngineError::WrongStage);
        }
        if bond < required {
            return Err(EngineError::InsufficientBond { offered: bond, required });
        }
        let outcome = market.resolve_outcome(outcome)?;
        ledger.transfer_cash(proposer, &oracle_account(market.id()), bond)?;
        Ok(self.new_proposal(market.id(), proposer, outcome, bond, bond, window, now))
    }

    /// Challenges a pending proposal; the chain moves to its next stage.
    pub fn dispute(&mut self, ledger: &mut Ledger, proposal: u64, disputer: &AccountId, bond: Amount, now: u64) -> Result<usize> {
        let p = self.proposals.get(&proposal).ok_or(EngineError::UnknownProposal(proposal))?;
        let mid = p.market.clone();
        self.unresolved(&mid)?;
        if p.status != ProposalStatus::Pending || now > p.deadline {
            return Err(EngineError::WindowClosed);
        }
        if bond < p.dispute_bond {
            return Err(EngineError::InsufficientBond { offered: bond, required: p.dispute_bond });
        }
        ledger.transfer_cash(disputer, &oracle_account(&mid), bond)?;
        self.proposals.get_mut(&proposal).expect("checked").status =
            ProposalStatus::Disputed { disputer: disputer.clone(), bond };
        let next = self.market(&mid)?.stage + 1;
        self.enter_stage(ledger, &mid, next, now)?;
        Ok(next)
    }

    /// Updates threshold tracking for an auto-resolve stage from current prices.
    pub fn observe_prices(&mut self, market: &Market, now: u64, price: impl Fn(PriceSource, &str) -> Option<Price>) {
        let Some(m) = self.markets.get(market.id()) else { return };
        if m.register != Register::Unresolved || m.pending.is_some() {
            return;
        }
        let Stage::AutoResolve(rule) = &self.policies[&m.policy].stages[m.stage] else { return };
        let (threshold, source) = (rule.threshold, rule.source);
        let m = self.markets.get_mut(market.id()).expect("checked");
        for (j, label) in market.labels().iter().enumerate() {
            if market.winning_outcome_of(j).is_none() {
                continue;
            }
            if price(source, label).is_some_and(|p| p >= threshold) {
                m.above_since.entry(label.clone()).or_insert(now);
            } else {
                m.above_since.remove(label);
            }
        }
    }

    /// Emits a zero-bond proposal for a label that held above the threshold
    /// long enough. Returns the proposal id, if any.
    pub fn auto_check(&mut self, market: &Market, now: u64) -> Result<Option<u64>> {
        let m = self.unresolved(market.id())?;
        let Stage::AutoResolve(rule) = self.policies[&m.policy].stages[m.stage].clone() else {
            return Err(EngineError::WrongStage);
        };
        if m.pending.is_some() {
            return Ok(None);
        }
        let hit = market.labels().iter().enumerate().find(|(_, l)| {
            m.above_since.get(*l).is_some_and(|since| now.saturating_sub(*since) >= rule.duration)
        });
        let Some((j, _)) = hit else { return Ok(None) };
        let outcome = Outcome::Categorical(market.winning_outcome_of(j).expect("tracked labels win somewhere").to_owned());
        Ok(Some(self.new_proposal(market.id(), &auto_account(), outcome, 0, rule.dispute_bond, rule.window, now)))
    }

    /// Ruling by an allowlisted arbiter. Returns the outcome when it is final.
    pub fn arbiter(&mut self, market: &Market, arbiter: &AccountId, outcome: &OutcomeArg, now: u64) -> Result<Option<Outcome>> {
        let m = self.unresolved(market.id())?;
        let stages = &self.policies[&m.policy].stages;
        let Stage::Arbiter { allowlist, window, dispute_bond } = stages[m.stage].clone() else {
            return Err(EngineError::WrongStage);
        };
        if !allowlist.contains(arbiter) {
            return Err(EngineError::NotArbiter(arbiter.clone()));
        }
        if m.pending.is_some() {
            return Err(EngineError::WrongStage);
        }
        let outcome = market.resolve_outcome(outcome)?;
        if m.stage + 1 == stages.len() || window == 0 {
            return Ok(Some(outcome));
        }
        self.new_proposal(market.id(), arbiter, outcome, 0, dispute_bond, window, now);
        Ok(None)
    }

    fn round_mut(&mut self, id: &MarketId) -> Result<&mut VoteRound> {
        self.unresolved(id)?;
        self.markets
            .get_mut(id)
            .and_then(|m| m.round.as_mut())
            .ok_or_else(|| EngineError::NoActiveRound(id.clone()))
    }

    pub fn commit(&mut self, market: &MarketId, voter: &AccountId, digest: &str, now: u64) -> Result<()> {
        let r = self.round_mut(market)?;
        if r.params.secrecy != Secrecy::CommitReveal {
            return Err(EngineError::WrongStage);
        }
        if !r.electorate.contains_key(voter) {
            return Err(EngineError::NotEnrolled(voter.clone()));
        }
        if now > r.commit_deadline {
            return Err(EngineError::DeadlinePassed);
        }
        r.commitments.insert(voter.clone(), digest.to_owned());
        Ok(())
    }

    /// Opens a committed ballot. A ballot that fails to match its commitment
    /// (or names no valid outcome) is voided; `Ok(false)` reports that case.
    pub fn reveal(&mut self, market: &Market, voter: &AccountId, outcome: &str, salt: &str, now: u64) -> Result<bool> {
        let parsed = market.resolve_outcome(&parse_outcome_arg(outcome));
        let r = self.round_mut(market.id())?;
        if r.params.secrecy != Secrecy::CommitReveal {
            return Err(EngineError::WrongStage);
        }
        if !r.electorate.contains_key(voter) {
            return Err(EngineError::NotEnrolled(voter.clone()));
        }
        if now <= r.commit_deadline {
            return Err(EngineError::PhaseNotOpen);
        }
        if now > r.reveal_deadline {
            return Err(EngineError::DeadlinePassed);
        }
        let Some(digest) = r.commitments.get(voter) else {
            return Err(EngineError::NotEnrolled(voter.clone()));
        };
        let valid = *digest == ballot_digest(outcome, salt, voter.as_str());
        match (valid, parsed) {
            (true, Ok(o)) => {
                r.revealed.insert(voter.clone(), o);
                Ok(true)
            }
            _ => {
                r.commitments.remove(voter);
                r.void.push(voter.clone());
                Ok(false)
            }
        }
    }

    /// Ballot in an open (non-secret) round.
    pub fn cast_vote(&mut self, market: &Market, voter: &AccountId, outcome: &OutcomeArg, now: u64) -> Result<()> {
        let o = market.resolve_outcome(outcome)?;
        let r = self.round_mut(market.id())?;
        if r.params.secrecy != Secrecy::Open {
            return Err(EngineError::WrongStage);
        }
        if !r.electorate.contains_key(voter) {
            return Err(EngineError::NotEnrolled(voter.clone()));
        }
        if now > r.commit_deadline {
            return Err(EngineError::DeadlinePassed);
        }
        r.revealed.insert(voter.clone(), o);
        Ok(())
    }

    pub fn fund_pot(&mut self, ledger: &mut Ledger, market: &MarketId, funder: &AccountId, amount: Amount) -> Result<()> {
        let r = self.round_mut(market)?;
        ledger.transfer_gov(funder, &pot_account(market, r.number), amount)?;
        *r.pot_funders.entry(funder.clone()).or_default() += amount;
        Ok(())
    }

    /// True while `who` sits in the electorate of an open round.
    pub fn stake_locked(&self, who: &AccountId) -> bool {
        self.markets.values().any(|m| m.round.as_ref().is_some_and(|r| r.electorate.contains_key(who)))
    }

    /// Closes the round after its reveal deadline. A decided round slashes
    /// revealed dissenters into the pot and pays the pot to the majority; a
    /// failed round refunds the pot and escalates.
    pub fn tally(&mut self, ledger: &mut Ledger, market: &MarketId, now: u64) -> Result<(TallyReport, Option<Outcome>)> {
        let r = self.round_mut(market)?;
        if now <= r.reveal_deadline {
            return Err(EngineError::RevealOpen);
        }
        let round = r.clone();
        let (verdict, weights) = vote::tally(&round);
        let pot = pot_account(market, round.number);
        let mut report = TallyReport { round: round.number, weights, ..TallyReport::default() };

        let decided = match &verdict {
            TallyVerdict::Decided(o) => Some(o.clone()),
            _ => None,
        };
        if let Some(result) = &decided {
            for (voter, o) in &round.revealed {
                if o != result {
                    let stake = round.electorate[voter];
                    let cut = mul_div_floor(stake, round.params.slash_ppm, PPM).min(ledger.staked(voter));
                    if cut > 0 {
                        ledger.slash(voter, &pot, cut)?;
                        report.slashed.insert(voter.clone(), cut);
                    }
                }
            }
            let winners: Vec<(&AccountId, Amount)> = round
                .revealed
                .iter()
                .filter(|(_, o)| *o == result)
                .map(|(v, _)| (v, round.electorate[v]))
                .collect();
            let total: Amount = winners.iter().map(|(_, s)| s).sum();
            let pot_size = ledger.gov(&pot);
            let mut paid = 0;
            for (v, s) in &winners {
                let share = mul_div_floor(pot_size, *s, total);
                paid += share;
                *report.rewards.entry((*v).clone()).or_default() += share;
            }
            if let Some((top, _)) = winners.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0))) {
                *report.rewards.entry((*top).clone()).or_default() += pot_size - paid;
            }
            for (v, amount) in &report.rewards {
                ledger.transfer_gov(&pot, v, *amount)?;
            }
        } else {
            for (funder, amount) in &round.pot_funders {
                ledger.transfer_gov(&pot, funder, *amount)?;
            }
        }
        report.verdict = Some(verdict);
        let m = self.market_mut(market)?;
        m.round = None;
        if decided.is_none() {
            let next = m.stage + 1;
            self.enter_stage(ledger, market, next, now)?;
            report.escalated_to = Some(next);
        }
        Ok((report, decided))
    }

    /// Expires undisputed proposals and auto-resolve timeouts at `now`.
    /// Returns outcomes ready for finalization.
    pub fn on_advance(&mut self, ledger: &Ledger, markets: &BTreeMap<MarketId, Market>, now: u64) -> Result<Vec<(MarketId, Outcome)>> {
        let mut ready = Vec::new();
        let ids: Vec<MarketId> = self.markets.keys().cloned().collect();
        for id in ids {
            let m = &self.markets[&id];
            if m.register != Register::Unresolved {
                continue;
            }
            if let Some(pid) = m.pending {
                let p = self.proposals.get_mut(&pid).expect("pending proposal");
                if now > p.deadline {
                    p.status = ProposalStatus::Accepted;
                    ready.push((id.clone(), p.outcome.clone()));
                }
                continue;
            }
            if let Stage::AutoResolve(AutoResolveRule { timeout: Some(t), .. }) = self.policies[&m.policy].stages[m.stage] {
                let created = markets.get(&id).map_or(0, |mk| mk.spec.created);
                if now >= created + t {
                    let next = m.stage + 1;
                    self.enter_stage(ledger, &id, next, now)?;
                }
            }
        }
        Ok(ready)
    }

    /// Sets the register and settles every bond posted on the market.
    pub fn finalize(&mut self, ledger: &mut Ledger, market: &MarketId, outcome: Outcome, now: u64) -> Result<()> {
        self.unresolved(market)?;
        let escrow = oracle_account(market);
        let pids = self.market(market)?.proposals.clone();
        for pid in pids {
            let p = self.proposals.get_mut(&pid).expect("listed proposal");
            match std::mem::replace(&mut p.status, ProposalStatus::Settled) {
                ProposalStatus::Pending | ProposalStatus::Accepted => {
                    ledger.transfer_cash(&escrow, &p.proposer, p.bond)?;
                }
                ProposalStatus::Disputed { disputer, bond } => {
                    let winner = if p.outcome == outcome { p.proposer.clone() } else { disputer };
                    ledger.transfer_cash(&escrow, &winner, p.bond + bond)?;
                }
                ProposalStatus::Settled => {}
            }
        }
        let m = self.market_mut(market)?;
        let round = m.round.take();
        m.pending = None;
        m.above_since.clear();
        m.register = Register::Resolved { outcome, at: now };
        if let Some(r) = round {
            let pot = pot_account(market, r.number);
            for (funder, amount) in &r.pot_funders {
                ledger.transfer_gov(&pot, funder, *amount)?;
            }
        }
        Ok(())
    }
}

/// Ballot text to outcome argument: integers name scalar observations.
pub fn parse_outcome_arg(s: &str) -> OutcomeArg {
    match s.parse::<i64>() {
        Ok(x) => OutcomeArg::Quantity(x),
        Err(_) => OutcomeArg::Name(s.to_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketSpec;
    use crate::units::SCALE;

    const U: u64 = SCALE;

    struct Fx {
        l: Ledger,
        r: Resolution,
        m: Market,
    }

    fn a(s: &str) -> AccountId {
        AccountId::from(s)
    }

    fn fx(policy: ResolutionPolicy) -> Fx {
        let mut l = Ledger::default();
        for (who, gov) in [("alice", 10), ("bob", 10), ("carol", 30)] {
            l.mint_cash(&a(who), 1_000 * U).unwrap();
            l.mint_gov(&a(who), gov * U).unwrap();
            l.stake(&a(who), gov * U).unwrap();
        }
        let mut r = Resolution::default();
        let mut spec = MarketSpec::binary("hal", &policy.id);
        spec.created = 0;
        r.define_policy(policy).unwrap();
        let m = Market::new(spec).unwrap();
        r.attach(&l, &m, 0).unwrap();
        Fx { l, r, m }
    }

    #[test]
    fn undisputed_proposal_finalizes_and_refunds() {
        let mut f = fx(ResolutionPolicy::optimistic("opt", 100 * U, 20, "judge"));
        let pid = f.r.propose(&mut f.l, &f.m, &a("alice"), &"False".into(), 100 * U, 1).unwrap();
        assert_eq!(f.r.propose(&mut f.l, &f.m, &a("bob"), &"True".into(), 100 * U, 1).unwrap_err(), EngineError::WrongStage);
        let markets = BTreeMap::from([(f.m.id().clone(), f.m.clone())]);
        assert!(f.r.on_advance(&f.l, &markets, 21).unwrap().is_empty());
        let ready = f.r.on_advance(&f.l, &markets, 22).unwrap();
        assert_eq!(ready, vec![(f.m.id().clone(), Outcome::Categorical("False".into()))]);
        f.r.finalize(&mut f.l, f.m.id(), ready[0].1.clone(), 22).unwrap();
        assert_eq!(f.l.cash(&a("alice")), 1_000 * U);
        assert_eq!(f.r.dispute(&mut f.l, pid, &a("bob"), 100 * U, 22).unwrap_err(), EngineError::AlreadyResolved(f.m.id().clone()));
        assert!(matches!(
            f.r.finalize(&mut f.l, f.m.id(), Outcome::Categorical("True".into()), 23),
            Err(EngineError::AlreadyResolved(_))
        ));
    }

    #[test]
    fn disputed_proposal_goes_to_vote_and_bonds_follow_verdict() {
        let mut f = fx(ResolutionPolicy::optimistic("opt", 100 * U, 20, "judge"));
        let pid = f.r.propose(&mut f.l, &f.m, &a("alice"), &"True".into(), 100 * U, 1).unwrap();
        assert!(matches!(f.r.dispute(&mut f.l, pid, &a("bob"), 99 * U, 2), Err(EngineError::InsufficientBond { .. })));
        assert_eq!(f.r.dispute(&mut f.l, pid, &a("bob"), 100 * U, 2).unwrap(), 1);
        let mid = f.m.id().clone();
        for (v, o) in [("alice", "True"), ("bob", "False"), ("carol", "False")] {
            let d = ballot_digest(o, "s", v);
            f.r.commit(&mid, &a(v), &d, 5).unwrap();
        }
        assert_eq!(f.r.reveal(&f.m, &a("alice"), "True", "s", 12), Err(EngineError::PhaseNotOpen));
        for (v, o) in [("alice", "True"), ("bob", "False"), ("carol", "False")] {
            assert!(f.r.reveal(&f.m, &a(v), o, "s", 13).unwrap());
        }
        assert!(f.r.stake_locked(&a("alice")));
        assert_eq!(f.r.tally(&mut f.l, &mid, 22).unwrap_err(), EngineError::RevealOpen);
        let (report, outcome) = f.r.tally(&mut f.l, &mid, 23).unwrap();
        assert_eq!(outcome, Some(Outcome::Categorical("False".into())));
        assert_eq!(report.slashed[&a("alice")], 2 * U);
        assert_eq!(report.rewards[&a("bob")] + report.rewards[&a("carol")], 2 * U);
        f.r.finalize(&mut f.l, &mid, outcome.unwrap(), 23).unwrap();
        assert_eq!(f.l.cash(&a("bob")), 1_100 * U);
        assert_eq!(f.l.cash(&a("alice")), 900 * U);
        f.l.check_conservation().unwrap();
    }

    #[test]
    fn bad_reveal_voids_ballot() {
        let mut f = fx(ResolutionPolicy::optimistic("opt", 0, 5, "judge"));
        let pid = f.r.propose(&mut f.l, &f.m, &a("alice"), &"True".into(), 0, 0).unwrap();
        f.r.dispute(&mut f.l, pid, &a("bob"), 0, 1).unwrap();
        let mid = f.m.id().clone();
        f.r.commit(&mid, &a("carol"), &ballot_digest("True", "x", "carol"), 2).unwrap();
        assert!(!f.r.reveal(&f.m, &a("carol"), "True", "y", 12).unwrap());
        assert_eq!(f.r.market(&mid).unwrap().round.as_ref().unwrap().void, vec![a("carol")]);
        // Nobody revealed: no quorum, escalate to the arbiter.
        let (report, outcome) = f.r.tally(&mut f.l, &mid, 22).unwrap();
        assert_eq!((report.verdict, outcome), (Some(TallyVerdict::NoQuorum), None));
        assert_eq!(report.escalated_to, Some(2));
        assert_eq!(f.r.arbiter(&f.m, &a("mallory"), &"True".into(), 23), Err(EngineError::NotArbiter(a("mallory"))));
        assert_eq!(f.r.arbiter(&f.m, &a("judge"), &"True".into(), 23).unwrap(), Some(Outcome::Categorical("True".into())));
    }

    #[test]
    fn commit_after_deadline_rejected() {
        let mut f = fx(ResolutionPolicy::optimistic("opt", 0, 5, "judge"));
        let pid = f.r.propose(&mut f.l, &f.m, &a("alice"), &"True".into(), 0, 0).unwrap();
        f.r.dispute(&mut f.l, pid, &a("bob"), 0, 0).unwrap();
        let err = f.r.commit(f.m.id(), &a("bob"), "00", 11).unwrap_err();
        assert_eq!(err, EngineError::DeadlinePassed);
        assert_eq!(f.r.commit(f.m.id(), &a("dave"), "00", 1).unwrap_err(), EngineError::NotEnrolled(a("dave")));
    }
}
