//! Logarithmic market scoring rule bookmaker for winner-take-all markets.
//!
//! `C(q) = b * ln(sum_i exp(q_i / b))`. A trade moving the outstanding vector
//! from `q` to `q + d` costs `C(q + d) - C(q)`, quantized half-even to
//! micro-units. The operator's bond sits in the market treasury and absorbs
//! the quantization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::{Market, PayoffKind, SINGLE_BUNDLE};
use crate::units::{round_half_even, Amount};

/// `b * logsumexp(q / b)`, shifted by the maximum for stability.
pub fn cost(b: f64, q: &[f64]) -> f64 {
    let m = q.iter().map(|x| x / b).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = q.iter().map(|x| (x / b - m).exp()).sum();
    b * (m + s.ln())
}

pub fn prices(b: f64, q: &[f64]) -> Vec<f64> {
    let m = q.iter().map(|x| x / b).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = q.iter().map(|x| (x / b - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Smallest bond covering the worst-case loss `b ln n`, in micro-units.
pub fn min_bond(b: Amount, n: usize) -> Amount {
    (b as f64 * (n as f64).ln()).ceil() as Amount
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmsrBookmaker {
    pub market: MarketId,
    pub operator: AccountId,
    /// Liquidity parameter in micro-units.
    pub b: Amount,
    pub labels: Vec<String>,
    /// Net quantity issued per label, in share-micro-units.
    pub q: Vec<i64>,
    pub bond: Amount,
    /// Net numeraire received from traders.
    pub premiums: i64,
    pub trades: u64,
}

impl LmsrBookmaker {
    fn qf(&self) -> Vec<f64> {
        self.q.iter().map(|&x| x as f64).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        prices(self.b as f64, &self.qf())
    }

    pub fn price(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.prices()[i])
    }

    fn delta_vec(&self, deltas: &BTreeMap<String, i64>) -> Result<Vec<i64>> {
        let mut d = vec![0i64; self.labels.len()];
        for (label, v) in deltas {
            let i = self.labels.iter().position(|l| l == label).ok_or_else(|| EngineError::UnknownLabel {
                market: self.market.clone(),
                label: label.clone(),
            })?;
            d[i] = d[i].checked_add(*v).ok_or(EngineError::Overflow)?;
        }
        Ok(d)
    }

    /// Cost of moving the outstanding vector by `deltas`; negative when the
    /// trader is paid. Pure.
    pub fn quote(&self, deltas: &BTreeMap<String, i64>) -> Result<i64> {
        let d = self.delta_vec(deltas)?;
        Ok(self.quote_vec(&d))
    }

    fn quote_vec(&self, d: &[i64]) -> i64 {
        if d.iter().all(|&x| x == 0) {
            return 0;
        }
        let b = self.b as f64;
        let q = self.qf();
        let q2: Vec<f64> = q.iter().zip(d).map(|(a, x)| a + *x as f64).collect();
        round_half_even(cost(b, &q2) - cost(b, &q)) as i64
    }

    /// Realized loss if `outcome` wins: payout owed on issued shares minus
    /// premiums collected.
    pub fn loss_at(&self, outcome: usize) -> i64 {
        self.q[outcome] - self.premiums
    }

    pub fn worst_loss(&self) -> i64 {
        (0..self.q.len()).map(|i| self.loss_at(i)).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bookmakers {
    pub by_market: BTreeMap<MarketId, LmsrBookmaker>,
}

impl Bookmakers {
    pub fn get(&self, market: &MarketId) -> Result<&LmsrBookmaker> {
        self.by_market.get(market).ok_or_else(|| EngineError::UnknownBookmaker(market.clone()))
    }

    pub fn create(&mut self, ledger: &mut Ledger, market: &Market, operator: &AccountId, b: Amount, bond: Amount) -> Result<()> {
        if market.kind() != PayoffKind::Wta {
            return Err(EngineError::NotWta(market.id().clone()));
        }
        if self.by_market.contains_key(market.id()) {
            return Err(EngineError::BookmakerExists(market.id().clone()));
        }
        if b == 0 {
            return Err(EngineError::InvalidAmount("liquidity parameter must be positive".into()));
        }
        let required = min_bond(b, market.labels().len());
        if bond < required {
            return Err(EngineError::BondTooSmall { bond, required });
        }
        ledger.deposit_treasury(operator, market.id(), SINGLE_BUNDLE, bond)?;
        self.by_market.insert(
            market.id().clone(),
            LmsrBookmaker {
                market: market.id().clone(),
                operator: operator.clone(),
                b,
                labels: market.labels().to_vec(),
                q: vec![0; market.labels().len()],
                bond,
                premiums: 0,
                trades: 0,
            },
        );
        Ok(())
    }

    /// Buys (positive deltas) or sells (negative) shares against the
    /// bookmaker. Returns the cost paid by `who` (negative if received).
    pub fn trade(&mut self, ledger: &mut Ledger, market: &Market, who: &AccountId, deltas: &BTreeMap<String, i64>) -> Result<i64> {
        let mm = self.by_market.get_mut(market.id()).ok_or_else(|| EngineError::UnknownBookmaker(market.id().clone()))?;
        let d = mm.delta_vec(deltas)?;
        if d.iter().all(|&x| x == 0) {
            return Err(EngineError::InvalidQuantity(0));
        }
        let cost = mm.quote_vec(&d);
        let mid = market.id();
        for (label, &x) in mm.labels.iter().zip(&d) {
            if x < 0 {
                ledger.burn_shares(who, mid, label, x.unsigned_abs())?;
            }
        }
        if cost >= 0 {
            ledger.deposit_treasury(who, mid, SINGLE_BUNDLE, cost as Amount)?;
        } else {
            let owed = cost.unsigned_abs();
            let held = ledger.book(mid).map_or(0, |b| b.bundle_treasury(SINGLE_BUNDLE));
            if held < owed {
                return Err(EngineError::BondExhausted);
            }
            ledger.withdraw_treasury(mid, SINGLE_BUNDLE, who, owed)?;
        }
        for (label, &x) in mm.labels.iter().zip(&d) {
            if x > 0 {
                ledger.mint_shares(who, mid, label, x as u64)?;
            }
        }
        let held = ledger.book(mid).map_or(0, |b| b.bundle_treasury(SINGLE_BUNDLE));
        if held < ledger.bundle_liability(market, SINGLE_BUNDLE, None) {
            return Err(EngineError::BondExhausted);
        }
        for (q, x) in mm.q.iter_mut().zip(&d) {
            *q = q.checked_add(*x).ok_or(EngineError::Overflow)?;
        }
        mm.premiums += cost;
        mm.trades += 1;
        Ok(cost)
    }
}
