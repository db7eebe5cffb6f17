//! Balances, share supplies and market treasuries.
//!
//! Every mutation is a paired move, so numeraire held by accounts plus
//! numeraire held in treasuries always equals what the faucet issued.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{AccountId, MarketId};
use crate::market::{Market, Outcome, PayoffKind};
use crate::units::{Amount, Qty, SCALE};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub cash: Amount,
    pub gov: Amount,
    pub staked: Amount,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shares: BTreeMap<MarketId, BTreeMap<String, Qty>>,
}

impl Account {
    pub fn shares_of(&self, market: &MarketId, label: &str) -> Qty {
        self.shares.get(market).and_then(|m| m.get(label)).copied().unwrap_or(0)
    }
}

/// Per-market collateral and supply bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketBook {
    pub supplies: BTreeMap<String, Qty>,
    /// Collateral per bundle.
    pub treasury: BTreeMap<String, Amount>,
    /// Collateral released by negative-risk conversions, shared by all bundles.
    pub reserve: Amount,
    pub redeemed: BTreeMap<String, Qty>,
    pub paid_out: Amount,
}

impl MarketBook {
    pub fn supply(&self, label: &str) -> Qty {
        self.supplies.get(label).copied().unwrap_or(0)
    }

    pub fn bundle_treasury(&self, bundle: &str) -> Amount {
        self.treasury.get(bundle).copied().unwrap_or(0)
    }

    pub fn total_treasury(&self) -> Amount {
        self.treasury.values().sum::<Amount>() + self.reserve
    }

    /// Drops zero entries so that a state and its round trip serialize alike.
    fn prune(&mut self) {
        self.supplies.retain(|_, q| *q != 0);
        self.treasury.retain(|_, t| *t != 0);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSolvency {
    pub bundle: String,
    pub liability: Amount,
    pub treasury: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvencyReport {
    pub market: MarketId,
    /// Worst-case claim over the outcomes still possible.
    pub liability: Amount,
    pub treasury: Amount,
    pub solvent: bool,
    pub bundles: Vec<BundleSolvency>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub accounts: BTreeMap<AccountId, Account>,
    pub books: BTreeMap<MarketId, MarketBook>,
    pub cash_issued: Amount,
    pub gov_issued: Amount,
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).ok_or(EngineError::Overflow)
}

impl Ledger {
    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    fn acct(&mut self, id: &AccountId) -> &mut Account {
        self.accounts.entry(id.clone()).or_default()
    }

    pub fn cash(&self, id: &AccountId) -> Amount {
        self.accounts.get(id).map_or(0, |a| a.cash)
    }

    pub fn gov(&self, id: &AccountId) -> Amount {
        self.accounts.get(id).map_or(0, |a| a.gov)
    }

    pub fn staked(&self, id: &AccountId) -> Amount {
        self.accounts.get(id).map_or(0, |a| a.staked)
    }

    pub fn shares(&self, id: &AccountId, market: &MarketId, label: &str) -> Qty {
        self.accounts.get(id).map_or(0, |a| a.shares_of(market, label))
    }

    pub fn book(&self, market: &MarketId) -> Option<&MarketBook> {
        self.books.get(market)
    }

    pub(crate) fn book_mut(&mut self, market: &MarketId) -> &mut MarketBook {
        self.books.entry(market.clone()).or_default()
    }

    pub fn supply(&self, market: &MarketId, label: &str) -> Qty {
        self.books.get(market).map_or(0, |b| b.supply(label))
    }

    // numeraire

    pub fn mint_cash(&mut self, to: &AccountId, amount: Amount) -> Result<()> {
        self.cash_issued = add(self.cash_issued, amount)?;
        let a = self.acct(to);
        a.cash = add(a.cash, amount)?;
        Ok(())
    }

    pub fn debit_cash(&mut self, from: &AccountId, amount: Amount) -> Result<()> {
        let available = self.cash(from);
        if available < amount {
            return Err(EngineError::InsufficientFunds { account: from.clone(), needed: amount, available });
        }
        self.acct(from).cash -= amount;
        Ok(())
    }

    fn credit_cash(&mut self, to: &AccountId, amount: Amount) -> Result<()> {
        let a = self.acct(to);
        a.cash = add(a.cash, amount)?;
        Ok(())
    }

    pub fn transfer_cash(&mut self, from: &AccountId, to: &AccountId, amount: Amount) -> Result<()> {
        self.debit_cash(from, amount)?;
        self.credit_cash(to, amount)
    }

    pub fn deposit_treasury(&mut self, from: &AccountId, market: &MarketId, bundle: &str, amount: Amount) -> Result<()> {
        self.debit_cash(from, amount)?;
        let book = self.book_mut(market);
        let t = book.treasury.entry(bundle.to_owned()).or_default();
        *t = add(*t, amount)?;
        Ok(())
    }

    /// Pays from one bundle's treasury.
    pub fn withdraw_treasury(&mut self, market: &MarketId, bundle: &str, to: &AccountId, amount: Amount) -> Result<()> {
        let book = self.book_mut(market);
        let t = book.treasury.entry(bundle.to_owned()).or_default();
        if *t < amount {
            return Err(EngineError::InvariantViolation(format!(
                "treasury of {market}/{bundle} holds {t}, asked for {amount}"
            )));
        }
        *t -= amount;
        book.prune();
        self.credit_cash(to, amount)
    }

    /// Pays from `bundle` first (if given), then the shared reserve, then the
    /// other bundles in order. Used by negative-risk markets, whose collateral
    /// is pooled across bundles.
    pub fn withdraw_pooled(&mut self, market: &MarketId, bundle: Option<&str>, to: &AccountId, amount: Amount) -> Result<()> {
        let book = self.book_mut(market);
        if book.total_treasury() < amount {
            return Err(EngineError::InvariantViolation(format!(
                "pooled collateral of {market} holds {}, asked for {amount}",
                book.total_treasury()
            )));
        }
        let mut left = amount;
        if let Some(own) = bundle.and_then(|b| book.treasury.get_mut(b)) {
            let take = left.min(*own);
            *own -= take;
            left -= take;
        }
        let take = left.min(book.reserve);
        book.reserve -= take;
        left -= take;
        for t in book.treasury.values_mut() {
            let take = left.min(*t);
            *t -= take;
            left -= take;
        }
        debug_assert_eq!(left, 0);
        book.prune();
        self.credit_cash(to, amount)
    }

    /// Moves collateral from a bundle treasury into the shared reserve.
    pub fn treasury_to_reserve(&mut self, market: &MarketId, bundle: &str, amount: Amount) -> Result<()> {
        let book = self.book_mut(market);
        let t = book.treasury.entry(bundle.to_owned()).or_default();
        if *t < amount {
            return Err(EngineError::InvariantViolation(format!(
                "treasury of {market}/{bundle} holds {t}, cannot release {amount}"
            )));
        }
        *t -= amount;
        book.reserve = add(book.reserve, amount)?;
        book.prune();
        Ok(())
    }

    // shares

    pub fn mint_shares(&mut self, to: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<()> {
        let book = self.book_mut(market);
        let s = book.supplies.entry(label.to_owned()).or_default();
        *s = add(*s, qty)?;
        let h = self.acct(to).shares.entry(market.clone()).or_default().entry(label.to_owned()).or_default();
        *h = add(*h, qty)?;
        Ok(())
    }

    pub fn debit_shares(&mut self, from: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<()> {
        let available = self.shares(from, market, label);
        if available < qty {
            return Err(EngineError::InsufficientShares {
                account: from.clone(),
                market: market.clone(),
                label: label.to_owned(),
                needed: qty,
                available,
            });
        }
        let acct = self.acct(from);
        let held = acct.shares.get_mut(market).expect("checked above");
        let h = held.get_mut(label).expect("checked above");
        *h -= qty;
        if *h == 0 {
            held.remove(label);
            if held.is_empty() {
                acct.shares.remove(market);
            }
        }
        Ok(())
    }

    pub fn burn_shares(&mut self, from: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<()> {
        self.debit_shares(from, market, label, qty)?;
        let book = self.book_mut(market);
        let s = book.supplies.entry(label.to_owned()).or_default();
        *s -= qty;
        book.prune();
        Ok(())
    }

    pub fn transfer_shares(&mut self, from: &AccountId, to: &AccountId, market: &MarketId, label: &str, qty: Qty) -> Result<()> {
        self.debit_shares(from, market, label, qty)?;
        let h = self.acct(to).shares.entry(market.clone()).or_default().entry(label.to_owned()).or_default();
        *h = add(*h, qty)?;
        Ok(())
    }

    // governance token

    pub fn mint_gov(&mut self, to: &AccountId, amount: Amount) -> Result<()> {
        self.gov_issued = add(self.gov_issued, amount)?;
        let a = self.acct(to);
        a.gov = add(a.gov, amount)?;
        Ok(())
    }

    pub fn transfer_gov(&mut self, from: &AccountId, to: &AccountId, amount: Amount) -> Result<()> {
        let available = self.gov(from);
        if available < amount {
            return Err(EngineError::InsufficientGov { account: from.clone(), needed: amount, available });
        }
        self.acct(from).gov -= amount;
        let a = self.acct(to);
        a.gov = add(a.gov, amount)?;
        Ok(())
    }

    pub fn stake(&mut self, who: &AccountId, amount: Amount) -> Result<()> {
        let available = self.gov(who);
        if available < amount {
            return Err(EngineError::InsufficientGov { account: who.clone(), needed: amount, available });
        }
        let a = self.acct(who);
        a.gov -= amount;
        a.staked = add(a.staked, amount)?;
        Ok(())
    }

    pub fn unstake(&mut self, who: &AccountId, amount: Amount) -> Result<()> {
        let available = self.staked(who);
        if available < amount {
            return Err(EngineError::InsufficientGov { account: who.clone(), needed: amount, available });
        }
        let a = self.acct(who);
        a.staked -= amount;
        a.gov += amount;
        Ok(())
    }

    /// Moves staked tokens of `who` to the liquid balance of `to`.
    pub fn slash(&mut self, who: &AccountId, to: &AccountId, amount: Amount) -> Result<()> {
        let available = self.staked(who);
        if available < amount {
            return Err(EngineError::InsufficientGov { account: who.clone(), needed: amount, available });
        }
        self.acct(who).staked -= amount;
        let a = self.acct(to);
        a.gov = add(a.gov, amount)?;
        Ok(())
    }

    // invariants

    /// Worst-case claim on one bundle's labels, in numeraire micro-units.
    pub fn bundle_liability(&self, market: &Market, bundle: &str, resolved: Option<&Outcome>) -> Amount {
        let Some(book) = self.books.get(market.id()) else { return 0 };
        let Ok(b) = market.bundle(bundle) else { return 0 };
        let worst = market
            .liability_scenarios(resolved)
            .iter()
            .map(|r| b.labels.iter().map(|&j| book.supply(&market.labels()[j]) as u128 * r[j] as u128).sum::<u128>())
            .max()
            .unwrap_or(0);
        worst.div_ceil(SCALE as u128).min(u64::MAX as u128) as Amount
    }

    /// Collateral of `market` against its worst-case claim. Before resolution
    /// the worst case ranges over every outcome; after it, only the realized
    /// outcome can be redeemed.
    pub fn solvency(&self, market: &Market, resolved: Option<&Outcome>) -> SolvencyReport {
        let empty = MarketBook::default();
        let book = self.books.get(market.id()).unwrap_or(&empty);
        let scenarios = market.liability_scenarios(resolved);
        let supplies: Vec<u128> = market.labels().iter().map(|l| book.supply(l) as u128).collect();
        let claim = |labels: &mut dyn Iterator<Item = usize>, r: &[u64]| -> u128 {
            labels.map(|j| supplies[j] * r[j] as u128).sum()
        };
        let ceil_units = |x: u128| -> Amount { x.div_ceil(SCALE as u128).min(u64::MAX as u128) as Amount };

        let mut bundles = Vec::new();
        let mut solvent = true;
        for b in market.bundles() {
            let worst = scenarios.iter().map(|r| claim(&mut b.labels.iter().copied(), r)).max().unwrap_or(0);
            let liability = ceil_units(worst);
            let treasury = book.bundle_treasury(&b.id);
            if market.kind() != PayoffKind::YnbNr && treasury < liability {
                solvent = false;
            }
            bundles.push(BundleSolvency { bundle: b.id.clone(), liability, treasury });
        }
        let all = scenarios
            .iter()
            .map(|r| claim(&mut (0..market.labels().len()), r))
            .max()
            .unwrap_or(0);
        let liability = ceil_units(all);
        let treasury = book.total_treasury();
        if treasury < liability {
            solvent = false;
        }
        SolvencyReport { market: market.id().clone(), liability, treasury, solvent, bundles }
    }

    /// Conservation of numeraire and governance tokens.
    pub fn check_conservation(&self) -> Result<()> {
        let held: u128 = self.accounts.values().map(|a| a.cash as u128).sum();
        let locked: u128 = self.books.values().map(|b| b.total_treasury() as u128).sum();
        if held + locked != self.cash_issued as u128 {
            return Err(EngineError::InvariantViolation(format!(
                "numeraire not conserved: accounts {held} + treasuries {locked} != issued {}",
                self.cash_issued
            )));
        }
        let gov: u128 = self.accounts.values().map(|a| a.gov as u128 + a.staked as u128).sum();
        if gov != self.gov_issued as u128 {
            return Err(EngineError::InvariantViolation(format!(
                "governance tokens not conserved: {gov} != {}",
                self.gov_issued
            )));
        }
        Ok(())
    }
}
