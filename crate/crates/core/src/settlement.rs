//! Pull redemption after resolution, and accounting of what stays unclaimed.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::{Market, Outcome, PayoffKind};
use crate::units::{value_floor, Amount, Price, Qty};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedemptionReceipt {
    pub account: AccountId,
    pub market: MarketId,
    pub label: String,
    pub qty: Qty,
    pub payoff: Price,
    pub paid: Amount,
}

/// Burns `qty` shares and pays `floor(qty * R_j(outcome))`.
pub fn redeem(ledger: &mut Ledger, market: &Market, outcome: &Outcome, who: &AccountId, label: &str, qty: Qty) -> Result<RedemptionReceipt> {
    if qty == 0 {
        return Err(EngineError::InvalidQuantity(0));
    }
    let j = market.label_index(label)?;
    let payoff = market.payoff_ix(j, outcome)?;
    let paid = value_floor(qty, payoff);
    ledger.burn_shares(who, market.id(), label, qty)?;
    let bundle = market.bundle_of(j).id.clone();
    if paid > 0 {
        if market.kind() == PayoffKind::YnbNr {
            ledger.withdraw_pooled(market.id(), Some(&bundle), who, paid)?;
        } else {
            ledger.withdraw_treasury(market.id(), &bundle, who, paid)?;
        }
    }
    let book = ledger.book_mut(market.id());
    *book.redeemed.entry(label.to_owned()).or_default() += qty;
    book.paid_out += paid;
    Ok(RedemptionReceipt {
        account: who.clone(),
        market: market.id().clone(),
        label: label.to_owned(),
        qty,
        payoff,
        paid,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurplusReport {
    pub market: MarketId,
    /// Still owed to holders of unredeemed shares at the realized outcome.
    pub outstanding_liability: Amount,
    pub treasury: Amount,
    /// Treasury left over once every outstanding share is redeemed.
    pub residual: Amount,
    pub paid_out: Amount,
}

pub fn surplus_report(ledger: &Ledger, market: &Market, outcome: &Outcome) -> SurplusReport {
    let book = ledger.book(market.id()).cloned().unwrap_or_default();
    let mut owed: u128 = 0;
    for (j, label) in market.labels().iter().enumerate() {
        let r = market.payoff_ix(j, outcome).unwrap_or(0);
        owed += book.supply(label) as u128 * r as u128;
    }
    let outstanding = owed.div_ceil(crate::units::SCALE as u128) as Amount;
    let treasury = book.total_treasury();
    SurplusReport {
        market: market.id().clone(),
        outstanding_liability: outstanding,
        treasury,
        residual: treasury.saturating_sub(outstanding),
        paid_out: book.paid_out,
    }
}

pub fn require_resolved<'a>(market: &MarketId, outcome: Option<&'a Outcome>) -> Result<&'a Outcome> {
    outcome.ok_or_else(|| EngineError::NotResolved(market.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets;
    use crate::market::{MarketSpec, OutcomeArg};
    use crate::units::SCALE;

    const U: u64 = SCALE;

    #[test]
    fn losing_shares_burn_for_zero() {
        let mut l = Ledger::default();
        let a = AccountId::from("a");
        l.mint_cash(&a, 10 * U).unwrap();
        let m = Market::new(MarketSpec::binary("hal", "p")).unwrap();
        gadgets::split(&mut l, &m, &a, None, 5 * U).unwrap();
        let f = Outcome::Categorical("False".into());
        assert_eq!(redeem(&mut l, &m, &f, &a, "NO", 5 * U).unwrap().paid, 5 * U);
        assert_eq!(redeem(&mut l, &m, &f, &a, "YES", 5 * U).unwrap().paid, 0);
        assert_eq!(l.supply(m.id(), "YES"), 0);
        assert_eq!(l.cash(&a), 10 * U);
        let s = surplus_report(&l, &m, &f);
        assert_eq!((s.outstanding_liability, s.residual), (0, 0));
    }

    #[test]
    fn scalar_long_pays_fraction() {
        let mut l = Ledger::default();
        let a = AccountId::from("a");
        l.mint_cash(&a, 10 * U).unwrap();
        let m = Market::new(MarketSpec::scalar("pv", 0, 100_000_000, 3, "p")).unwrap();
        gadgets::split(&mut l, &m, &a, None, 10 * U).unwrap();
        let o = m.resolve_outcome(&OutcomeArg::Quantity(49_800_000)).unwrap();
        assert_eq!(redeem(&mut l, &m, &o, &a, "LONG", 10 * U).unwrap().paid, 4_980_000);
        let s = surplus_report(&l, &m, &o);
        assert_eq!(s.outstanding_liability, 5_020_000);
        assert_eq!(s.residual, 0);
    }
}
