//! Conversions that are exact equalities of payoff vectors: minting and
//! burning complete sets, and negative-risk NO conversions.

use std::collections::BTreeSet;

use crate::error::{EngineError, Result};
use crate::ids::AccountId;
use crate::ledger::Ledger;
use crate::market::{Market, PayoffKind};
use crate::units::{Amount, Qty};

/// Deposits `qty` numeraire into a bundle and mints `qty` of each of its labels.
pub fn split(ledger: &mut Ledger, market: &Market, who: &AccountId, bundle: Option<&str>, qty: Qty) -> Result<()> {
    let b = market.select_bundle(bundle)?;
    if !b.complete_set {
        return Err(EngineError::NotSplittable { market: market.id().clone(), bundle: b.id.clone() });
    }
    if qty == 0 {
        return Ok(());
    }
    ledger.deposit_treasury(who, market.id(), &b.id, qty)?;
    for &j in &b.labels {
        ledger.mint_shares(who, market.id(), &market.labels()[j], qty)?;
    }
    Ok(())
}

/// Burns `qty` of each label in a bundle and returns `qty` numeraire.
pub fn merge(ledger: &mut Ledger, market: &Market, who: &AccountId, bundle: Option<&str>, qty: Qty) -> Result<()> {
    let b = market.select_bundle(bundle)?;
    if !b.complete_set {
        return Err(EngineError::NotSplittable { market: market.id().clone(), bundle: b.id.clone() });
    }
    if qty == 0 {
        return Ok(());
    }
    for &j in &b.labels {
        let label = &market.labels()[j];
        let held = ledger.shares(who, market.id(), label);
        if held < qty {
            return Err(EngineError::IncompleteSet { label: label.clone(), needed: qty - held });
        }
    }
    for &j in &b.labels {
        ledger.burn_shares(who, market.id(), &market.labels()[j], qty)?;
    }
    if market.kind() == PayoffKind::YnbNr {
        ledger.withdraw_pooled(market.id(), Some(&b.id), who, qty)
    } else {
        ledger.withdraw_treasury(market.id(), &b.id, who, qty)
    }
}

/// Negative-risk conversion of `qty` NO shares on each bundle in `keys`
/// (outcome names or bundle ids): the NO shares are burned, `qty` YES shares
/// of every other outcome are minted, and `(|keys| - 1) * qty` numeraire is
/// paid out. A single key is the plain NO-to-YES conversion.
pub fn convert_no_set(ledger: &mut Ledger, market: &Market, who: &AccountId, keys: &[String], qty: Qty) -> Result<Amount> {
    if market.kind() != PayoffKind::YnbNr {
        return Err(EngineError::NotNegRisk(market.id().clone()));
    }
    if keys.is_empty() {
        return Err(EngineError::InvalidQuantity(0));
    }
    let mut chosen = BTreeSet::new();
    for k in keys {
        let b = market.neg_risk_bundle(k)?;
        if !chosen.insert(b.id.clone()) {
            return Err(EngineError::InvalidAmount(format!("bundle {} listed twice", b.id)));
        }
    }
    if qty == 0 {
        return Ok(0);
    }
    let id = market.id();
    let before: Vec<(String, Amount)> =
        chosen.iter().map(|b| (b.clone(), ledger.bundle_liability(market, b, None))).collect();

    for b in &chosen {
        let no = &market.labels()[market.bundle(b)?.no.expect("pair bundle")];
        ledger.burn_shares(who, id, no, qty)?;
    }
    // Collateral freed in the converted bundles moves to the shared reserve.
    for (b, old) in before {
        let drop = old.saturating_sub(ledger.bundle_liability(market, &b, None));
        let held = ledger.book(id).map_or(0, |bk| bk.bundle_treasury(&b));
        ledger.treasury_to_reserve(id, &b, drop.min(held))?;
    }
    for b in market.bundles() {
        if !chosen.contains(&b.id) {
            let yes = &market.labels()[b.yes.expect("pair bundle")];
            ledger.mint_shares(who, id, yes, qty)?;
        }
    }
    let cash = (chosen.len() as u64 - 1).checked_mul(qty).ok_or(EngineError::Overflow)?;
    if cash > 0 {
        ledger.withdraw_pooled(id, None, who, cash)?;
    }
    Ok(cash)
}

/// Burns NO shares on every bundle except `key`'s and mints the YES share of
/// `key`, paying `(|outcomes| - 2) * qty`.
pub fn convert_no_all_but(ledger: &mut Ledger, market: &Market, who: &AccountId, key: &str, qty: Qty) -> Result<Amount> {
    let keep = market.neg_risk_bundle(key)?.id.clone();
    let others: Vec<String> = market.bundles().iter().filter(|b| b.id != keep).map(|b| b.id.clone()).collect();
    convert_no_set(ledger, market, who, &others, qty)
}

pub fn convert_no(ledger: &mut Ledger, market: &Market, who: &AccountId, key: &str, qty: Qty) -> Result<()> {
    convert_no_set(ledger, market, who, &[key.to_owned()], qty).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketSpec, Outcome};
    use crate::units::SCALE;

    fn setup(spec: MarketSpec) -> (Ledger, Market, AccountId) {
        let mut l = Ledger::default();
        let a = AccountId::from("alice");
        l.mint_cash(&a, 100 * SCALE).unwrap();
        (l, Market::new(spec).unwrap(), a)
    }

    #[test]
    fn split_then_merge_is_identity() {
        let (mut l, m, a) = setup(MarketSpec::wta("m", &["A", "B", "C"], "p"));
        let start = l.clone();
        split(&mut l, &m, &a, None, 3 * SCALE).unwrap();
        assert_eq!(l.cash(&a), 97 * SCALE);
        assert_eq!(l.shares(&a, m.id(), "B"), 3 * SCALE);
        merge(&mut l, &m, &a, None, 3 * SCALE).unwrap();
        // Only the empty book entry differs.
        assert_eq!(l.accounts, start.accounts);
        assert_eq!(l.book(m.id()).unwrap().total_treasury(), 0);
    }

    #[test]
    fn merge_needs_every_label() {
        let (mut l, m, a) = setup(MarketSpec::wta("m", &["A", "B"], "p"));
        split(&mut l, &m, &a, None, SCALE).unwrap();
        l.transfer_shares(&a, &AccountId::from("bob"), m.id(), "A", 1).unwrap();
        let err = merge(&mut l, &m, &a, None, SCALE).unwrap_err();
        assert_eq!(err, EngineError::IncompleteSet { label: "A".into(), needed: 1 });
    }

    #[test]
    fn multi_bundle_split_needs_bundle_name() {
        let (mut l, m, a) = setup(MarketSpec::ynb("m", &["A", "B"], false, "p"));
        assert!(matches!(split(&mut l, &m, &a, None, SCALE), Err(EngineError::BundleRequired(_))));
        split(&mut l, &m, &a, Some("B"), SCALE).unwrap();
        assert_eq!(l.shares(&a, m.id(), "B:NO"), SCALE);
    }

    #[test]
    fn no_conversion_preserves_payoff_at_every_outcome() {
        let outcomes = ["A", "B", "C", "D"];
        let (mut l, m, a) = setup(MarketSpec::ynb("m", &outcomes, true, "p"));
        split(&mut l, &m, &a, Some("B"), 2 * SCALE).unwrap();
        let value = |l: &Ledger, o: &str| -> u64 {
            let out = Outcome::Categorical(o.into());
            let shares: u64 = m
                .labels()
                .iter()
                .map(|lab| l.shares(&a, m.id(), lab) / SCALE * m.payoff(lab, &out).unwrap())
                .sum();
            shares + l.cash(&a)
        };
        let before: Vec<u64> = outcomes.iter().map(|o| value(&l, o)).collect();
        convert_no(&mut l, &m, &a, "B", 2 * SCALE).unwrap();
        assert_eq!(l.shares(&a, m.id(), "B:NO"), 0);
        assert_eq!(l.shares(&a, m.id(), "C:YES"), 2 * SCALE);
        let after: Vec<u64> = outcomes.iter().map(|o| value(&l, o)).collect();
        assert_eq!(before, after);
        assert!(l.solvency(&m, None).solvent);
    }

    #[test]
    fn set_conversion_pays_cash() {
        let (mut l, m, a) = setup(MarketSpec::ynb("m", &["A", "B", "C"], true, "p"));
        for k in ["A", "B", "C"] {
            split(&mut l, &m, &a, Some(k), SCALE).unwrap();
        }
        let keys: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let cash = convert_no_set(&mut l, &m, &a, &keys, SCALE).unwrap();
        assert_eq!(cash, SCALE);
        assert_eq!(l.shares(&a, m.id(), "C:YES"), 2 * SCALE);
        assert!(l.solvency(&m, None).solvent);
        l.check_conservation().unwrap();
    }

    #[test]
    fn conversion_requires_neg_risk() {
        let (mut l, m, a) = setup(MarketSpec::ynb("m", &["A", "B"], false, "p"));
        split(&mut l, &m, &a, Some("A"), SCALE).unwrap();
        assert!(matches!(convert_no(&mut l, &m, &a, "A", SCALE), Err(EngineError::NotNegRisk(_))));
    }
}
