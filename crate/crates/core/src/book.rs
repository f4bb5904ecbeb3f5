//! Price-time priority limit order book for a single asset.
//!
//! Matching is continuous: an incoming order trades immediately against the
//! best opposite levels and any remainder (limit orders only) rests in the
//! book. Executions always occur at the resting (maker) price. Market buy
//! orders may carry a cash budget that caps how much they are allowed to
//! spend; matching stops once the next whole share is unaffordable.

use crate::types::{AccountId, AssetId, OrderId, Price, Qty, Side};
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BookError {
    #[error("order quantity must be positive")]
    ZeroQuantity,
}

/// A resting limit order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestingOrder {
    pub order_id: OrderId,
    pub account: AccountId,
    pub side: Side,
    pub price: Price,
    pub remaining: Qty,
    /// Arrival sequence; earlier orders at a price level fill first.
    pub submitted_seq: u64,
}

/// One execution. `price` is always the maker's limit price.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub trade_id: u64,
    pub asset: AssetId,
    pub price: Price,
    pub qty: Qty,
    pub maker_order: OrderId,
    pub taker_order: OrderId,
    pub maker_account: AccountId,
    pub taker_account: AccountId,
    pub taker_side: Side,
}

impl Trade {
    /// Trade-log line: `seq,asset,price,qty,maker_order,taker_order,maker_acct,taker_acct`.
    pub fn log_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trade_id,
            self.asset,
            self.price,
            self.qty,
            self.maker_order,
            self.taker_order,
            self.maker_account,
            self.taker_account
        )
    }
}

/// Outcome of submitting an order to the book.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub order_id: OrderId,
    pub trades: Vec<Trade>,
    /// Quantity left resting in the book (limit orders only).
    pub resting: Qty,
    /// Quantity neither executed nor resting (market orders only).
    pub unfilled: Qty,
}

impl Placement {
    pub fn filled(&self) -> Qty {
        self.trades.iter().map(|t| t.qty).sum()
    }

    pub fn spent(&self) -> i64 {
        self.trades.iter().map(|t| t.price.cost(t.qty)).sum()
    }
}

/// Aggregate depth at one price level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthLevel {
    pub price: Price,
    pub qty: Qty,
    pub orders: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub bid: Option<Price>,
    pub ask: Option<Price>,
}

impl Quote {
    /// Mid-price in dollars; defined only when both sides are quoted.
    pub fn mid(&self) -> Option<f64> {
        match (self.bid, self.ask) {
            (Some(b), Some(a)) => Some((b.ticks() + a.ticks()) as f64 * 0.005),
            _ => None,
        }
    }

    /// Reference half-spread in dollars, floored at one tick.
    pub fn s_ref(&self) -> Option<f64> {
        match (self.bid, self.ask) {
            (Some(b), Some(a)) => {
                let half = (a.ticks() - b.ticks()) as f64 * 0.005;
                Some(half.max(Price::TICK))
            }
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct OrderBook {
    asset: AssetId,
    bids: BTreeMap<i64, VecDeque<RestingOrder>>,
    asks: BTreeMap<i64, VecDeque<RestingOrder>>,
    /// Location of live orders: side and price-level key.
    index: HashMap<OrderId, (Side, i64)>,
    next_seq: u64,
    next_trade_id: u64,
}

impl OrderBook {
    pub fn new(asset: AssetId) -> OrderBook {
        OrderBook {
            asset,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: HashMap::new(),
            next_seq: 0,
            next_trade_id: 0,
        }
    }

    pub fn asset(&self) -> AssetId {
        self.asset
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().map(|&t| Price::from_ticks(t).unwrap())
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().map(|&t| Price::from_ticks(t).unwrap())
    }

    pub fn quote(&self) -> Quote {
        Quote { bid: self.best_bid(), ask: self.best_ask() }
    }

    /// Submits a limit order; trades fire at maker prices and any remainder rests.
    pub fn place_limit(
        &mut self,
        order_id: OrderId,
        account: AccountId,
        side: Side,
        price: Price,
        qty: Qty,
    ) -> Result<Placement, BookError> {
        if qty == 0 {
            return Err(BookError::ZeroQuantity);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let (trades, remaining) =
            self.match_incoming(order_id, account, side, Some(price), qty, None);
        let mut resting = 0;
        if remaining > 0 {
            let order = RestingOrder {
                order_id,
                account,
                side,
                price,
                remaining,
                submitted_seq: seq,
            };
            self.index.insert(order_id, (side, price.ticks()));
            self.level_mut(side, price.ticks()).push_back(order);
            resting = remaining;
        }
        debug_assert!(self.not_crossed());
        Ok(Placement { order_id, trades, resting, unfilled: 0 })
    }

    /// Submits a market order. `budget` caps total spend in cents (buys only);
    /// quantity that cannot execute is dropped and reported as `unfilled`.
    pub fn place_market(
        &mut self,
        order_id: OrderId,
        account: AccountId,
        side: Side,
        qty: Qty,
        budget: Option<i64>,
    ) -> Result<Placement, BookError> {
        if qty == 0 {
            return Err(BookError::ZeroQuantity);
        }
        self.next_seq += 1;
        let (trades, remaining) = self.match_incoming(order_id, account, side, None, qty, budget);
        Ok(Placement { order_id, trades, resting: 0, unfilled: remaining })
    }

    /// Removes an order, returning the quantity cancelled. Unknown and
    /// already-completed orders cancel zero, so retries are harmless.
    pub fn cancel(&mut self, order_id: OrderId) -> Qty {
        let Some((side, ticks)) = self.index.remove(&order_id) else {
            return 0;
        };
        let tree = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let level = tree.get_mut(&ticks).expect("indexed level exists");
        let pos = level
            .iter()
            .position(|o| o.order_id == order_id)
            .expect("indexed order exists in level");
        let qty = level[pos].remaining;
        level.remove(pos);
        if level.is_empty() {
            tree.remove(&ticks);
        }
        qty
    }

    /// Cancels every resting order, best prices first, bids before asks.
    pub fn cancel_all(&mut self) -> Vec<(OrderId, AccountId, Qty)> {
        let mut out = Vec::new();
        for (_, level) in std::mem::take(&mut self.bids).into_iter().rev() {
            for o in level {
                out.push((o.order_id, o.account, o.remaining));
            }
        }
        for (_, level) in std::mem::take(&mut self.asks) {
            for o in level {
                out.push((o.order_id, o.account, o.remaining));
            }
        }
        self.index.clear();
        out
    }

    /// Aggregated depth, best `levels` price levels per side.
    pub fn depth(&self, levels: usize) -> (Vec<DepthLevel>, Vec<DepthLevel>) {
        let summarize = |level: &VecDeque<RestingOrder>| DepthLevel {
            price: level[0].price,
            qty: level.iter().map(|o| o.remaining).sum(),
            orders: level.len(),
        };
        let bids = self.bids.values().rev().take(levels).map(summarize).collect();
        let asks = self.asks.values().take(levels).map(summarize).collect();
        (bids, asks)
    }

    pub fn resting_count(&self) -> usize {
        self.index.len()
    }

    pub fn resting_qty(&self, order_id: OrderId) -> Option<Qty> {
        self.find(order_id).map(|o| o.remaining)
    }

    pub fn resting_owner(&self, order_id: OrderId) -> Option<AccountId> {
        self.find(order_id).map(|o| o.account)
    }

    fn find(&self, order_id: OrderId) -> Option<&RestingOrder> {
        let (side, ticks) = self.index.get(&order_id)?;
        let tree = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        tree.get(ticks)?.iter().find(|o| o.order_id == order_id)
    }

    pub fn counters(&self) -> (u64, u64) {
        (self.next_seq, self.next_trade_id)
    }

    /// Restores arrival/trade counters when rebuilding from a snapshot.
    pub fn set_counters(&mut self, next_seq: u64, next_trade_id: u64) {
        self.next_seq = next_seq;
        self.next_trade_id = next_trade_id;
    }

    /// Reinserts a resting order verbatim (snapshot restore). Callers must
    /// insert orders in ascending `submitted_seq` so level FIFO is preserved.
    pub fn restore_resting(&mut self, order: RestingOrder) {
        self.index.insert(order.order_id, (order.side, order.price.ticks()));
        self.level_mut(order.side, order.price.ticks()).push_back(order);
        debug_assert!(self.not_crossed());
    }

    /// Resting orders in deterministic order (price priority, then arrival).
    pub fn resting_orders(&self) -> Vec<&RestingOrder> {
        let mut out: Vec<&RestingOrder> = Vec::with_capacity(self.index.len());
        out.extend(self.bids.values().rev().flatten());
        out.extend(self.asks.values().flatten());
        out
    }

    fn level_mut(&mut self, side: Side, ticks: i64) -> &mut VecDeque<RestingOrder> {
        let tree = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        tree.entry(ticks).or_default()
    }

    fn not_crossed(&self) -> bool {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => b < a,
            _ => true,
        }
    }

    fn match_incoming(
        &mut self,
        taker_order: OrderId,
        taker_account: AccountId,
        taker_side: Side,
        limit: Option<Price>,
        qty: Qty,
        mut budget: Option<i64>,
    ) -> (Vec<Trade>, Qty) {
        let mut trades = Vec::new();
        let mut remaining = qty;
        while remaining > 0 {
            let best_ticks = match taker_side {
                Side::Buy => self.asks.keys().next().copied(),
                Side::Sell => self.bids.keys().next_back().copied(),
            };
            let Some(ticks) = best_ticks else { break };
            if let Some(limit) = limit {
                let crosses = match taker_side {
                    Side::Buy => ticks <= limit.ticks(),
                    Side::Sell => ticks >= limit.ticks(),
                };
                if !crosses {
                    break;
                }
            }
            let mut fill = remaining;
            if let Some(b) = budget {
                let affordable = (b / ticks).max(0) as Qty;
                fill = fill.min(affordable);
                if fill == 0 {
                    break;
                }
            }
            let tree = match taker_side {
                Side::Buy => &mut self.asks,
                Side::Sell => &mut self.bids,
            };
            let level = tree.get_mut(&ticks).expect("best level exists");
            while fill > 0 {
                let Some(maker) = level.front_mut() else { break };
                let q = fill.min(maker.remaining);
                trades.push(Trade {
                    trade_id: self.next_trade_id,
                    asset: self.asset,
                    price: maker.price,
                    qty: q,
                    maker_order: maker.order_id,
                    taker_order,
                    maker_account: maker.account,
                    taker_account,
                    taker_side,
                });
                self.next_trade_id += 1;
                maker.remaining -= q;
                fill -= q;
                remaining -= q;
                if let Some(b) = budget.as_mut() {
                    *b -= maker.price.cost(q);
                }
                if maker.remaining == 0 {
                    let done = level.pop_front().unwrap();
                    self.index.remove(&done.order_id);
                }
            }
            if level.is_empty() {
                tree.remove(&ticks);
            }
        }
        (trades, remaining)
    }
}
