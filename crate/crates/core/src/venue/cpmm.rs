//! Constant-product pools pairing one share label with the numeraire.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{sys, AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::Market;
use crate::units::{mul_div_floor, Amount, Price, Qty, SCALE};

const BPS: u128 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapSide {
    /// Numeraire in, shares out.
    Buy,
    /// Shares in, numeraire out.
    Sell,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpmmPool {
    pub id: String,
    pub market: MarketId,
    pub label: String,
    pub shares: Qty,
    pub cash: Amount,
    pub fee_bps: u64,
    pub lp_total: u64,
    pub lp: BTreeMap<AccountId, u64>,
    pub frozen: bool,
}

impl CpmmPool {
    pub fn account(&self) -> AccountId {
        sys(format!("pool/{}", self.id))
    }

    pub fn k(&self) -> u128 {
        self.shares as u128 * self.cash as u128
    }

    /// Marginal price in micro-units per share.
    pub fn spot_price(&self) -> Price {
        mul_div_floor(self.cash, SCALE, self.shares)
    }

    /// Output of swapping `amount_in`, floored in the pool's favor.
    pub fn quote(&self, side: SwapSide, amount_in: u64) -> Result<u64> {
        if amount_in == 0 {
            return Ok(0);
        }
        let (r_in, r_out) = match side {
            SwapSide::Buy => (self.cash as u128, self.shares as u128),
            SwapSide::Sell => (self.shares as u128, self.cash as u128),
        };
        let denom = r_in * BPS + amount_in as u128 * (BPS - self.fee_bps as u128);
        let new_out = (self.k() * BPS).div_ceil(denom);
        let out = r_out - new_out;
        if new_out == 0 {
            return Err(EngineError::PoolDrained);
        }
        Ok(out as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub amount_in: u64,
    pub amount_out: u64,
    pub price_after: Price,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amm {
    next_pool: u64,
    pub pools: BTreeMap<String, CpmmPool>,
}

impl Amm {
    pub fn pool(&self, id: &str) -> Result<&CpmmPool> {
        self.pools.get(id).ok_or_else(|| EngineError::UnknownPool(id.to_owned()))
    }

    fn pool_mut(&mut self, id: &str) -> Result<&mut CpmmPool> {
        self.pools.get_mut(id).ok_or_else(|| EngineError::UnknownPool(id.to_owned()))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create(
        &mut self,
        ledger: &mut Ledger,
        market: &Market,
        provider: &AccountId,
        label: &str,
        shares: Qty,
        cash: Amount,
        fee_bps: u64,
    ) -> Result<String> {
        market.label_index(label)?;
        if shares == 0 || cash == 0 {
            return Err(EngineError::ZeroReserve);
        }
        if fee_bps >= BPS as u64 {
            return Err(EngineError::InvalidAmount(format!("fee of {fee_bps} bps")));
        }
        let lp_total = (shares as u128 * cash as u128).isqrt() as u64;
        self.next_pool += 1;
        let id = format!("amm-{}", self.next_pool);
        let pool = CpmmPool {
            id: id.clone(),
            market: market.id().clone(),
            label: label.to_owned(),
            shares,
            cash,
            fee_bps,
            lp_total,
            lp: BTreeMap::from([(provider.clone(), lp_total)]),
            frozen: false,
        };
        let acct = pool.account();
        ledger.transfer_shares(provider, &acct, market.id(), label, shares)?;
        ledger.transfer_cash(provider, &acct, cash)?;
        self.pools.insert(id.clone(), pool);
        Ok(id)
    }

    pub fn swap(&mut self, ledger: &mut Ledger, pool: &str, who: &AccountId, side: SwapSide, amount_in: u64) -> Result<Swap> {
        let p = self.pool_mut(pool)?;
        if p.frozen {
            return Err(EngineError::MarketResolved(p.market.clone()));
        }
        let out = p.quote(side, amount_in)?;
        let acct = p.account();
        match side {
            SwapSide::Buy => {
                ledger.transfer_cash(who, &acct, amount_in)?;
                ledger.transfer_shares(&acct, who, &p.market, &p.label, out)?;
                p.cash += amount_in;
                p.shares -= out;
            }
            SwapSide::Sell => {
                ledger.transfer_shares(who, &acct, &p.market, &p.label, amount_in)?;
                ledger.transfer_cash(&acct, who, out)?;
                p.shares += amount_in;
                p.cash -= out;
            }
        }
        Ok(Swap { amount_in, amount_out: out, price_after: p.spot_price() })
    }

    /// Deposits reserves in the pool's exact current ratio.
    pub fn add_liquidity(&mut self, ledger: &mut Ledger, pool: &str, who: &AccountId, shares: Qty, cash: Amount) -> Result<u64> {
        let p = self.pool_mut(pool)?;
        if p.frozen {
            return Err(EngineError::MarketResolved(p.market.clone()));
        }
        if shares == 0 || cash == 0 {
            return Err(EngineError::ZeroReserve);
        }
        if shares as u128 * p.cash as u128 != cash as u128 * p.shares as u128 {
            return Err(EngineError::RatioMismatch);
        }
        let minted = mul_div_floor(shares, p.lp_total, p.shares);
        let acct = p.account();
        ledger.transfer_shares(who, &acct, &p.market, &p.label, shares)?;
        ledger.transfer_cash(who, &acct, cash)?;
        p.shares += shares;
        p.cash += cash;
        p.lp_total += minted;
        *p.lp.entry(who.clone()).or_default() += minted;
        Ok(minted)
    }

    /// Burns LP shares for a proportional, floored slice of both reserves.
    /// Burning the whole supply closes the pool.
    pub fn remove_liquidity(&mut self, ledger: &mut Ledger, pool: &str, who: &AccountId, lp: u64) -> Result<(Qty, Amount)> {
        let p = self.pool_mut(pool)?;
        let held = p.lp.get(who).copied().unwrap_or(0);
        if lp == 0 || held < lp {
            return Err(EngineError::InsufficientLiquidity { account: who.clone(), needed: lp, available: held });
        }
        let (shares, cash) = if lp == p.lp_total {
            (p.shares, p.cash)
        } else {
            (mul_div_floor(p.shares, lp, p.lp_total), mul_div_floor(p.cash, lp, p.lp_total))
        };
        if lp != p.lp_total && (shares == p.shares || cash == p.cash) {
            return Err(EngineError::PoolDrained);
        }
        let acct = p.account();
        ledger.transfer_shares(&acct, who, &p.market, &p.label, shares)?;
        ledger.transfer_cash(&acct, who, cash)?;
        p.shares -= shares;
        p.cash -= cash;
        p.lp_total -= lp;
        let entry = p.lp.get_mut(who).expect("checked above");
        *entry -= lp;
        if *entry == 0 {
            p.lp.remove(who);
        }
        if p.lp_total == 0 {
            self.pools.remove(pool);
        }
        Ok((shares, cash))
    }

    pub fn freeze_market(&mut self, market: &MarketId) {
        for p in self.pools.values_mut().filter(|p| p.market == *market) {
            p.frozen = true;
        }
    }

    /// Spot price of the deepest live pool on a label, if any.
    pub fn spot_price(&self, market: &MarketId, label: &str) -> Option<Price> {
        self.pools
            .values()
            .filter(|p| p.market == *market && p.label == label)
            .max_by_key(|p| (p.k(), std::cmp::Reverse(p.id.clone())))
            .map(CpmmPool::spot_price)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets;
    use crate::market::MarketSpec;

    const U: u64 = SCALE;

    fn setup() -> (Ledger, Market, Amm, AccountId) {
        let mut l = Ledger::default();
        let lp = AccountId::from("lp");
        l.mint_cash(&lp, 1_000 * U).unwrap();
        l.mint_cash(&AccountId::from("t"), 1_000 * U).unwrap();
        let m = Market::new(MarketSpec::binary("hal", "p")).unwrap();
        gadgets::split(&mut l, &m, &lp, None, 500 * U).unwrap();
        (l, m, Amm::default(), lp)
    }

    #[test]
    fn closed_form_buy() {
        let (mut l, m, mut amm, lp) = setup();
        let id = amm.create(&mut l, &m, &lp, "YES", 100 * U, 50 * U, 0).unwrap();
        assert_eq!(amm.pool(&id).unwrap().spot_price(), 500_000);
        let s = amm.swap(&mut l, &id, &AccountId::from("t"), SwapSide::Buy, 50 * U).unwrap();
        assert_eq!(s.amount_out, 50 * U);
        assert_eq!(amm.swap(&mut l, &id, &AccountId::from("t"), SwapSide::Buy, 0).unwrap().amount_out, 0);
    }

    #[test]
    fn zero_deposit_rejected_and_round_trip_exact() {
        let (mut l, m, mut amm, lp) = setup();
        assert_eq!(amm.create(&mut l, &m, &lp, "YES", 0, 50 * U, 0).unwrap_err(), EngineError::ZeroReserve);
        let before = l.clone();
        let id = amm.create(&mut l, &m, &lp, "YES", 100 * U, 50 * U, 0).unwrap();
        let total = amm.pool(&id).unwrap().lp_total;
        amm.remove_liquidity(&mut l, &id, &lp, total).unwrap();
        assert!(amm.pools.is_empty());
        assert_eq!(l.cash(&lp), before.cash(&lp));
        assert_eq!(l.shares(&lp, m.id(), "YES"), before.shares(&lp, m.id(), "YES"));
    }

    #[test]
    fn proportional_liquidity() {
        let (mut l, m, mut amm, lp) = setup();
        let id = amm.create(&mut l, &m, &lp, "YES", 100 * U, 50 * U, 30).unwrap();
        let lp0 = amm.pool(&id).unwrap().lp_total;
        assert_eq!(amm.add_liquidity(&mut l, &id, &lp, 100 * U, 51 * U).unwrap_err(), EngineError::RatioMismatch);
        amm.add_liquidity(&mut l, &id, &lp, 100 * U, 50 * U).unwrap();
        let p = amm.pool(&id).unwrap();
        assert_eq!(p.lp_total, 2 * lp0);
        assert_eq!(p.spot_price(), 500_000);
    }

    #[test]
    fn fee_grows_invariant() {
        let (mut l, m, mut amm, lp) = setup();
        let id = amm.create(&mut l, &m, &lp, "YES", 100 * U, 50 * U, 30).unwrap();
        let k0 = amm.pool(&id).unwrap().k();
        amm.swap(&mut l, &id, &AccountId::from("t"), SwapSide::Buy, 7 * U).unwrap();
        assert!(amm.pool(&id).unwrap().k() > k0);
    }
}
