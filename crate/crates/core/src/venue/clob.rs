//! Limit order books per share label, peer matching of long/short intents,
//! and the bid/ask-sum arbitrage scanner.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{sys, AccountId, MarketId};
use crate::ledger::Ledger;
use crate::market::{Market, PayoffKind};
use crate::units::{mul_div_ceil, mul_div_floor, value_floor, Amount, Price, Qty, SCALE};

pub fn escrow_account() -> AccountId {
    sys("clob")
}

pub fn intent_account() -> AccountId {
    sys("intents")
}

pub fn fee_account() -> AccountId {
    sys("fees")
}

const BPS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClobConfig {
    /// Price grid in micro-units.
    pub tick: Price,
    /// Quantity grid in share-micro-units.
    pub lot: Qty,
    pub taker_fee_bps: u64,
}

impl Default for ClobConfig {
    fn default() -> Self {
        // tick * lot is a multiple of SCALE, so every notional is exact.
        Self { tick: 100, lot: 10_000, taker_fee_bps: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[serde(alias = "buy")]
    Bid,
    #[serde(alias = "sell")]
    Ask,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: u64,
    pub owner: AccountId,
    pub market: MarketId,
    pub label: String,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub remaining: Qty,
    /// Numeraire still escrowed for a bid; zero for asks (their shares sit in escrow).
    pub escrow: Amount,
    pub placed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub maker: u64,
    pub taker: u64,
    pub buyer: AccountId,
    pub seller: AccountId,
    pub label: String,
    pub price: Price,
    pub qty: Qty,
    pub fee: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placed {
    pub order: u64,
    pub fills: Vec<Fill>,
    pub resting: Qty,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelBook {
    pub bids: BTreeMap<Price, VecDeque<u64>>,
    pub asks: BTreeMap<Price, VecDeque<u64>>,
}

impl LabelBook {
    fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Long,
    Short,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: u64,
    pub owner: AccountId,
    pub market: MarketId,
    pub bundle: String,
    pub side: Position,
    /// Price of the long (YES) label.
    pub price: Price,
    pub qty: Qty,
    pub remaining: Qty,
    pub margin: Amount,
    pub placed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentMatch {
    pub qty: Qty,
    pub long_paid: Amount,
    pub short_paid: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cross {
    pub qty: Qty,
    pub paid_a: Amount,
    pub paid_b: Amount,
    pub refund_a: Amount,
    pub refund_b: Amount,
}

/// Aggregate quantity per price level.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depth {
    pub bids: Vec<(Price, Qty)>,
    pub asks: Vec<(Price, Qty)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArbKind {
    #[serde(rename = "SUM_BIDS_GT_1")]
    SumBidsGt1,
    #[serde(rename = "SUM_ASKS_LT_1")]
    SumAsksLt1,
    #[serde(rename = "PAIR_BIDS_GT_1")]
    PairBidsGt1,
    #[serde(rename = "PAIR_ASKS_LT_1")]
    PairAsksLt1,
}

impl ArbKind {
    pub fn sells(self) -> bool {
        matches!(self, ArbKind::SumBidsGt1 | ArbKind::PairBidsGt1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbFlag {
    pub kind: ArbKind,
    /// Bundle for pair checks; `None` for the whole winner-take-all set.
    pub bundle: Option<String>,
    pub labels: Vec<String>,
    pub prices: Vec<Price>,
    pub sum: Price,
    /// Smallest aggregate quantity among the best levels used.
    pub depth: Qty,
    pub fees: Amount,
    /// Net profit of trading `depth` through the flagged levels.
    pub profit: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbReport {
    pub market: MarketId,
    pub flags: Vec<ArbFlag>,
    /// Some label in a checked set lacks a quote on one side.
    pub partial: bool,
    pub unquoted: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clob {
    pub config: ClobConfig,
    next_order: u64,
    next_intent: u64,
    pub orders: BTreeMap<u64, Order>,
    pub books: BTreeMap<MarketId, BTreeMap<String, LabelBook>>,
    pub intents: BTreeMap<u64, Intent>,
    pub last_trade: BTreeMap<MarketId, BTreeMap<String, Price>>,
}

impl Clob {
    pub fn new(config: ClobConfig) -> Self {
        Self { config, ..Self::default() }
    }

    fn fee(&self, notional: Amount) -> Amount {
        mul_div_floor(notional, self.config.taker_fee_bps, BPS)
    }

    fn check_qty(&self, qty: Qty) -> Result<()> {
        if qty == 0 || !qty.is_multiple_of(self.config.lot) {
            return Err(EngineError::InvalidQuantity(qty));
        }
        Ok(())
    }

    fn check_price(&self, price: Price, ceiling: Price) -> Result<()> {
        if price == 0 || price >= ceiling || !price.is_multiple_of(self.config.tick) {
            return Err(EngineError::PriceOutOfRange(price));
        }
        Ok(())
    }

    pub fn best_bid(&self, market: &MarketId, label: &str) -> Option<Price> {
        self.label_book(market, label).and_then(|b| b.bids.keys().next_back().copied())
    }

    pub fn best_ask(&self, market: &MarketId, label: &str) -> Option<Price> {
        self.label_book(market, label).and_then(|b| b.asks.keys().next().copied())
    }

    fn label_book(&self, market: &MarketId, label: &str) -> Option<&LabelBook> {
        self.books.get(market).and_then(|m| m.get(label))
    }

    fn level_qty(&self, ids: &VecDeque<u64>) -> Qty {
        ids.iter().map(|id| self.orders[id].remaining).sum()
    }

    pub fn depth(&self, market: &MarketId, label: &str) -> Depth {
        let Some(b) = self.label_book(market, label) else { return Depth::default() };
        Depth {
            bids: b.bids.iter().rev().map(|(p, ids)| (*p, self.level_qty(ids))).collect(),
            asks: b.asks.iter().map(|(p, ids)| (*p, self.level_qty(ids))).collect(),
        }
    }

    pub fn last_trade(&self, market: &MarketId, label: &str) -> Option<Price> {
        self.last_trade.get(market).and_then(|m| m.get(label)).copied()
    }

    /// Places a limit order, matching the marketable part against resting
    /// orders at their prices in price-time priority.
    #[allow(clippy::too_many_arguments)]
    pub fn place_order(
        &mut self,
        ledger: &mut Ledger,
        market: &Market,
        owner: &AccountId,
        label: &str,
        side: Side,
        price: Price,
        qty: Qty,
        now: u64,
    ) -> Result<Placed> {
        let j = market.label_index(label)?;
        self.check_price(price, market.payout_ceiling(j))?;
        self.check_qty(qty)?;
        let mid = market.id().clone();
        let esc = escrow_account();
        let escrow = match side {
            Side::Bid => {
                let notional = value_floor(qty, price);
                let escrow = notional + mul_div_ceil(notional, self.config.taker_fee_bps, BPS);
                ledger.transfer_cash(owner, &esc, escrow)?;
                escrow
            }
            Side::Ask => {
                ledger.transfer_shares(owner, &esc, &mid, label, qty)?;
                0
            }
        };
        self.next_order += 1;
        let id = self.next_order;
        let mut taker = Order {
            id,
            owner: owner.clone(),
            market: mid.clone(),
            label: label.to_owned(),
            side,
            price,
            qty,
            remaining: qty,
            escrow,
            placed: now,
        };

        let mut fills = Vec::new();
        let book = self.books.entry(mid.clone()).or_default().entry(label.to_owned()).or_default();
        while taker.remaining > 0 {
            let level = match side {
                Side::Bid => book.asks.first_entry().filter(|e| *e.key() <= price),
                Side::Ask => book.bids.last_entry().filter(|e| *e.key() >= price),
            };
            let Some(mut level) = level else { break };
            let level_price = *level.key();
            let maker_id = *level.get().front().expect("levels are never empty");
            let maker = self.orders.get_mut(&maker_id).expect("book references live orders");
            let fill = taker.remaining.min(maker.remaining);
            let notional = value_floor(fill, level_price);
            let fee = mul_div_floor(notional, self.config.taker_fee_bps, BPS);
            let (buyer, seller) = match side {
                Side::Bid => (taker.owner.clone(), maker.owner.clone()),
                Side::Ask => (maker.owner.clone(), taker.owner.clone()),
            };
            ledger.transfer_shares(&esc, &buyer, &mid, label, fill)?;
            ledger.transfer_cash(&esc, &seller, notional - if side == Side::Ask { fee } else { 0 })?;
            ledger.transfer_cash(&esc, &fee_account(), fee)?;
            match side {
                Side::Bid => taker.escrow -= notional + fee,
                Side::Ask => maker.escrow -= notional,
            }
            taker.remaining -= fill;
            maker.remaining -= fill;
            fills.push(Fill {
                maker: maker_id,
                taker: id,
                buyer,
                seller,
                label: label.to_owned(),
                price: level_price,
                qty: fill,
                fee,
            });
            if maker.remaining == 0 {
                let refund = std::mem::take(&mut maker.escrow);
                let maker_owner = maker.owner.clone();
                level.get_mut().pop_front();
                if level.get().is_empty() {
                    level.remove();
                }
                self.orders.remove(&maker_id);
                ledger.transfer_cash(&esc, &maker_owner, refund)?;
            }
        }
        if let Some(last) = fills.last() {
            self.last_trade.entry(mid.clone()).or_default().insert(label.to_owned(), last.price);
        }

        let resting = taker.remaining;
        if resting > 0 {
            let side_map = match side {
                Side::Bid => &mut book.bids,
                Side::Ask => &mut book.asks,
            };
            side_map.entry(price).or_default().push_back(id);
            self.orders.insert(id, taker);
        } else {
            ledger.transfer_cash(&esc, owner, taker.escrow)?;
            if book.is_empty() {
                self.prune(&mid, label);
            }
        }
        Ok(Placed { order: id, fills, resting })
    }

    fn prune(&mut self, market: &MarketId, label: &str) {
        if let Some(m) = self.books.get_mut(market) {
            if m.get(label).is_some_and(LabelBook::is_empty) {
                m.remove(label);
            }
            if m.is_empty() {
                self.books.remove(market);
            }
        }
    }

    fn unlink(&mut self, order: &Order) {
        if let Some(book) = self.books.get_mut(&order.market).and_then(|m| m.get_mut(&order.label)) {
            let side = match order.side {
                Side::Bid => &mut book.bids,
                Side::Ask => &mut book.asks,
            };
            if let Some(q) = side.get_mut(&order.price) {
                q.retain(|&x| x != order.id);
                if q.is_empty() {
                    side.remove(&order.price);
                }
            }
        }
        self.prune(&order.market, &order.label);
    }

    /// Removes an order and returns its escrow to the owner.
    pub fn cancel_order(&mut self, ledger: &mut Ledger, id: u64, who: Option<&AccountId>) -> Result<Order> {
        let order = self.orders.get(&id).ok_or(EngineError::UnknownOrder(id))?;
        if let Some(who) = who {
            if *who != order.owner {
                return Err(EngineError::NotOwner(who.clone()));
            }
        }
        let order = self.orders.remove(&id).expect("checked above");
        self.unlink(&order);
        let esc = escrow_account();
        match order.side {
            Side::Bid => ledger.transfer_cash(&esc, &order.owner, order.escrow)?,
            Side::Ask => ledger.transfer_shares(&esc, &order.owner, &order.market, &order.label, order.remaining)?,
        }
        Ok(order)
    }

    /// Cancels every order and intent on `market`, refunding escrow.
    pub fn clear_market(&mut self, ledger: &mut Ledger, market: &MarketId) -> Result<usize> {
        let orders: Vec<u64> = self.orders.values().filter(|o| o.market == *market).map(|o| o.id).collect();
        let intents: Vec<u64> = self.intents.values().filter(|i| i.market == *market).map(|i| i.id).collect();
        for id in &orders {
            self.cancel_order(ledger, *id, None)?;
        }
        for id in &intents {
            self.cancel_intent(ledger, *id, None)?;
        }
        Ok(orders.len() + intents.len())
    }

    // peer matching

    #[allow(clippy::too_many_arguments)]
    pub fn post_intent(
        &mut self,
        ledger: &mut Ledger,
        market: &Market,
        owner: &AccountId,
        bundle: Option<&str>,
        side: Position,
        price: Price,
        qty: Qty,
        now: u64,
    ) -> Result<u64> {
        let b = market.select_bundle(bundle)?;
        if b.yes.is_none() || !b.complete_set {
            return Err(EngineError::NotComplementary);
        }
        self.check_price(price, SCALE)?;
        self.check_qty(qty)?;
        let long_cost = value_floor(qty, price);
        let margin = match side {
            Position::Long => long_cost,
            Position::Short => qty - long_cost,
        };
        ledger.transfer_cash(owner, &intent_account(), margin).map_err(|e| match e {
            EngineError::InsufficientFunds { .. } => {
                EngineError::InsufficientMargin { account: owner.clone(), needed: margin }
            }
            e => e,
        })?;
        self.next_intent += 1;
        let id = self.next_intent;
        self.intents.insert(
            id,
            Intent {
                id,
                owner: owner.clone(),
                market: market.id().clone(),
                bundle: b.id.clone(),
                side,
                price,
                qty,
                remaining: qty,
                margin,
                placed: now,
            },
        );
        Ok(id)
    }

    pub fn cancel_intent(&mut self, ledger: &mut Ledger, id: u64, who: Option<&AccountId>) -> Result<Intent> {
        let intent = self.intents.get(&id).ok_or(EngineError::UnknownOrder(id))?;
        if let Some(who) = who {
            if *who != intent.owner {
                return Err(EngineError::NotOwner(who.clone()));
            }
        }
        let intent = self.intents.remove(&id).expect("checked above");
        ledger.transfer_cash(&intent_account(), &intent.owner, intent.margin)?;
        Ok(intent)
    }

    /// Funds a fresh complete pair from a long and a short intent at the same
    /// price: the long side receives YES, the short side NO.
    pub fn match_intents(&mut self, ledger: &mut Ledger, market: &Market, a: u64, b: u64) -> Result<IntentMatch> {
        let ia = self.intents.get(&a).ok_or(EngineError::UnknownOrder(a))?;
        let ib = self.intents.get(&b).ok_or(EngineError::UnknownOrder(b))?;
        let (long, short) = match (ia.side, ib.side) {
            (Position::Long, Position::Short) => (ia, ib),
            (Position::Short, Position::Long) => (ib, ia),
            _ => return Err(EngineError::NotComplementary),
        };
        if long.market != short.market || long.bundle != short.bundle || long.market != *market.id() {
            return Err(EngineError::NotComplementary);
        }
        if long.price != short.price {
            return Err(EngineError::PriceMismatch { long: long.price, short: short.price });
        }
        let qty = long.remaining.min(short.remaining);
        let long_paid = value_floor(qty, long.price);
        let short_paid = qty - long_paid;
        let (long_id, short_id) = (long.id, short.id);
        let bundle = market.bundle(&long.bundle)?;
        let (yes, no) = (bundle.yes.expect("pair"), bundle.no.expect("pair"));
        let (long_owner, short_owner) = (long.owner.clone(), short.owner.clone());

        ledger.deposit_treasury(&intent_account(), market.id(), &bundle.id, qty)?;
        ledger.mint_shares(&long_owner, market.id(), &market.labels()[yes], qty)?;
        ledger.mint_shares(&short_owner, market.id(), &market.labels()[no], qty)?;
        for (id, paid) in [(long_id, long_paid), (short_id, short_paid)] {
            let i = self.intents.get_mut(&id).expect("live intent");
            i.remaining -= qty;
            i.margin -= paid;
            if i.remaining == 0 {
                let left = i.margin;
                let owner = i.owner.clone();
                self.intents.remove(&id);
                ledger.transfer_cash(&intent_account(), &owner, left)?;
            }
        }
        Ok(IntentMatch { qty, long_paid, short_paid })
    }

    /// Fills two resting bids on complementary labels by minting the pair.
    /// Any excess of the combined bids over one unit is returned pro rata.
    pub fn complementary_cross(&mut self, ledger: &mut Ledger, market: &Market, a: u64, b: u64) -> Result<Cross> {
        let oa = self.orders.get(&a).ok_or(EngineError::UnknownOrder(a))?;
        let ob = self.orders.get(&b).ok_or(EngineError::UnknownOrder(b))?;
        if oa.side != Side::Bid || ob.side != Side::Bid || oa.market != ob.market || oa.market != *market.id() {
            return Err(EngineError::NotComplementary);
        }
        let ja = market.label_index(&oa.label)?;
        let jb = market.label_index(&ob.label)?;
        let bundle = market.bundle_of(ja);
        if market.complement(ja) != Some(jb) || !bundle.complete_set {
            return Err(EngineError::NotComplementary);
        }
        if oa.price + ob.price < SCALE {
            return Err(EngineError::PricesDoNotCover(oa.price, ob.price));
        }
        let qty = oa.remaining.min(ob.remaining);
        let paid_a = value_floor(qty, oa.price);
        let paid_b = value_floor(qty, ob.price);
        let surplus = paid_a + paid_b - qty;
        let refund_a = mul_div_floor(surplus, oa.price, oa.price + ob.price);
        let refund_b = surplus - refund_a;
        let (owner_a, owner_b) = (oa.owner.clone(), ob.owner.clone());
        let (label_a, label_b) = (oa.label.clone(), ob.label.clone());
        let esc = escrow_account();

        ledger.deposit_treasury(&esc, market.id(), &bundle.id, qty)?;
        ledger.transfer_cash(&esc, &owner_a, refund_a)?;
        ledger.transfer_cash(&esc, &owner_b, refund_b)?;
        ledger.mint_shares(&owner_a, market.id(), &label_a, qty)?;
        ledger.mint_shares(&owner_b, market.id(), &label_b, qty)?;
        for (id, paid) in [(a, paid_a), (b, paid_b)] {
            let o = self.orders.get_mut(&id).expect("live order");
            o.remaining -= qty;
            o.escrow -= paid;
            if o.remaining == 0 {
                let o = self.orders.remove(&id).expect("live order");
                self.unlink(&o);
                ledger.transfer_cash(&esc, &o.owner, o.escrow)?;
            }
        }
        Ok(Cross { qty, paid_a, paid_b, refund_a, refund_b })
    }

    // arbitrage

    fn best_level(&self, market: &MarketId, label: &str, side: Side) -> Option<(Price, Qty)> {
        let b = self.label_book(market, label)?;
        let (p, ids) = match side {
            Side::Bid => b.bids.iter().next_back()?,
            Side::Ask => b.asks.iter().next()?,
        };
        Some((*p, self.level_qty(ids)))
    }

    fn check_set(
        &self,
        market: &MarketId,
        labels: &[String],
        side: Side,
        bundle: Option<&str>,
        unquoted: &mut Vec<String>,
    ) -> Option<ArbFlag> {
        let mut levels = Vec::new();
        for l in labels {
            match self.best_level(market, l, side) {
                Some(level) => levels.push(level),
                None => {
                    unquoted.push(format!("{l}:{}", if side == Side::Bid { "bid" } else { "ask" }));
                }
            }
        }
        if levels.len() != labels.len() {
            return None;
        }
        let sum: Price = levels.iter().map(|(p, _)| p).sum();
        let depth = levels.iter().map(|(_, q)| *q).min().unwrap_or(0);
        let edge = match side {
            Side::Bid => sum.checked_sub(SCALE)?,
            Side::Ask => SCALE.checked_sub(sum)?,
        };
        let gross = value_floor(depth, edge);
        let fees: Amount = levels.iter().map(|(p, _)| self.fee(value_floor(depth, *p))).sum();
        let profit = gross.checked_sub(fees).filter(|p| *p > 0)?;
        let kind = match (side, bundle.is_some()) {
            (Side::Bid, false) => ArbKind::SumBidsGt1,
            (Side::Ask, false) => ArbKind::SumAsksLt1,
            (Side::Bid, true) => ArbKind::PairBidsGt1,
            (Side::Ask, true) => ArbKind::PairAsksLt1,
        };
        Some(ArbFlag {
            kind,
            bundle: bundle.map(str::to_owned),
            labels: labels.to_vec(),
            prices: levels.iter().map(|(p, _)| *p).collect(),
            sum,
            depth,
            fees,
            profit,
        })
    }

    /// Scans best quotes for bid sums above one unit and ask sums below it,
    /// over the winner-take-all label set and over each complementary pair.
    pub fn detect_arbitrage(&self, market: &Market) -> ArbReport {
        let mid = market.id();
        let mut flags = Vec::new();
        let mut unquoted = Vec::new();
        let set: Option<Vec<String>> = match market.kind() {
            PayoffKind::Wta => Some(market.labels().to_vec()),
            PayoffKind::YnbNr => {
                Some(market.bundles().iter().map(|b| market.labels()[b.yes.expect("pair")].clone()).collect())
            }
            _ => None,
        };
        if let Some(set) = set {
            for side in [Side::Bid, Side::Ask] {
                flags.extend(self.check_set(mid, &set, side, None, &mut unquoted));
            }
        }
        if market.kind() != PayoffKind::Wta {
            for b in market.bundles() {
                let (Some(y), Some(n)) = (b.yes, b.no) else { continue };
                if !b.complete_set {
                    continue;
                }
                let pair = [market.labels()[y].clone(), market.labels()[n].clone()];
                for side in [Side::Bid, Side::Ask] {
                    flags.extend(self.check_set(mid, &pair, side, Some(&b.id), &mut unquoted));
                }
            }
        }
        unquoted.sort();
        unquoted.dedup();
        ArbReport { market: mid.clone(), flags, partial: !unquoted.is_empty(), unquoted }
    }

    /// Numeraire and shares held in escrow, for conservation checks.
    pub fn escrowed_cash(&self) -> Amount {
        self.orders.values().map(|o| o.escrow).sum()
    }

    pub fn escrowed_margin(&self) -> Amount {
        self.intents.values().map(|i| i.margin).sum()
    }

    pub fn escrowed_shares(&self, market: &MarketId, label: &str) -> Qty {
        self.orders
            .values()
            .filter(|o| o.side == Side::Ask && o.market == *market && o.label == label)
            .map(|o| o.remaining)
            .sum()
    }
}
