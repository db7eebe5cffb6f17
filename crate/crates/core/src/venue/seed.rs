//! Bootstrapping a winner-take-all market from operator capital: half is
//! split into complete sets, and each label gets a pool holding its shares
//! plus a prior-weighted slice of the other half.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::gadgets;
use crate::ids::{AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::{Market, PayoffKind};
use crate::units::{round_half_even, Amount};
use crate::venue::cpmm::Amm;

pub const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededBookmaker {
    pub operator: AccountId,
    pub market: MarketId,
    pub capital: Amount,
    /// Priors in parts per million, as quantized for the deposits.
    pub priors_ppm: Vec<u64>,
    pub pools: Vec<String>,
    /// Numeraire deposited into each pool.
    pub deposits: Vec<Amount>,
}

impl SeededBookmaker {
    /// Operator value locked at deposit prices: split collateral plus pool cash.
    pub fn locked(&self) -> Amount {
        self.capital / 2 + self.deposits.iter().sum::<Amount>()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn seed_bookmaker(
    ledger: &mut Ledger,
    amm: &mut Amm,
    market: &Market,
    operator: &AccountId,
    capital: Amount,
    priors: &[f64],
    fee_bps: u64,
) -> Result<SeededBookmaker> {
    if market.kind() != PayoffKind::Wta {
        return Err(EngineError::NotWta(market.id().clone()));
    }
    if priors.len() != market.labels().len() {
        return Err(EngineError::InvalidAmount(format!(
            "{} priors for {} labels",
            priors.len(),
            market.labels().len()
        )));
    }
    let sum: f64 = priors.iter().sum();
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PRIOR_TOLERANCE {
        return Err(EngineError::PriorsDoNotSum(format!("{sum}")));
    }
    if capital == 0 || !capital.is_multiple_of(2) {
        return Err(EngineError::InvalidAmount(format!("capital {capital} must be even and positive")));
    }
    let n = capital / 2;
    let available = ledger.cash(operator);
    if available < capital {
        return Err(EngineError::InsufficientFunds { account: operator.clone(), needed: capital, available });
    }

    let mut deposits: Vec<Amount> = priors.iter().map(|p| round_half_even(p * n as f64) as Amount).collect();
    let head: Amount = deposits[..deposits.len() - 1].iter().sum();
    *deposits.last_mut().expect("at least one label") = n.checked_sub(head).ok_or(EngineError::Overflow)?;

    gadgets::split(ledger, market, operator, None, n)?;
    let mut pools = Vec::new();
    for (label, cash) in market.labels().iter().zip(&deposits) {
        pools.push(amm.create(ledger, market, operator, label, n, *cash, fee_bps)?);
    }
    Ok(SeededBookmaker {
        operator: operator.clone(),
        market: market.id().clone(),
        capital,
        priors_ppm: priors.iter().map(|p| round_half_even(p * 1e6) as u64).collect(),
        pools,
        deposits,
    })
}
