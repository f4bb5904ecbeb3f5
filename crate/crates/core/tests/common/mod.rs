//! Shared fixtures for integration tests.
//!
//! `NaiveBook` is the reference matcher: a deliberately simple quadratic
//! implementation of the same matching contract as the production book
//! (price-time priority, maker-price execution, budget-capped market buys).
//! It stores resting orders in a flat vector and linearly scans for the best
//! maker on every fill step. Keep it dumb — its value is independence.

#![allow(dead_code)]

use cdasim::book::OrderBook;
use cdasim::types::{AccountId, OrderId, Price, Qty, Side};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Limit { id: OrderId, account: AccountId, side: Side, ticks: i64, qty: Qty },
    Market { id: OrderId, account: AccountId, side: Side, qty: Qty, budget: Option<i64> },
    Cancel { id: OrderId },
}

/// A seeded stream of mixed operations with prices that random-walk around
/// $100 so both sides keep trading.
pub fn order_stream(seed: u64, n: usize) -> Vec<Op> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(n);
    let mut center: i64 = 10_000;
    for i in 0..n {
        let id = (i + 1) as OrderId;
        let account = rng.gen_range(1..=8);
        let side = if rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
        center = (center + rng.gen_range(-3..=3)).clamp(9_000, 11_000);
        let roll: f64 = rng.gen();
        if roll < 0.55 {
            let offset = rng.gen_range(-40..=40);
            let ticks = (center + offset).max(1);
            ops.push(Op::Limit { id, account, side, ticks, qty: rng.gen_range(1..=200) });
        } else if roll < 0.85 {
            let budget = match side {
                Side::Buy if rng.gen_bool(0.5) => {
                    Some(rng.gen_range(0..=3_000_000))
                }
                _ => None,
            };
            ops.push(Op::Market { id, account, side, qty: rng.gen_range(1..=150), budget });
        } else {
            // Cancel a random earlier id; hits live, filled, and unknown ids.
            let target = rng.gen_range(1..=id.max(2) - 1).max(1);
            ops.push(Op::Cancel { id: target });
        }
    }
    ops
}

struct NaiveOrder {
    order_id: OrderId,
    account: AccountId,
    side: Side,
    ticks: i64,
    remaining: Qty,
    arrival: u64,
}

/// Reference matcher. Trade log lines use the same format as
/// [`cdasim::book::Trade::log_line`].
pub struct NaiveBook {
    resting: Vec<NaiveOrder>,
    next_arrival: u64,
    next_trade_id: u64,
    pub log: String,
}

impl NaiveBook {
    pub fn new() -> NaiveBook {
        NaiveBook { resting: Vec::new(), next_arrival: 0, next_trade_id: 0, log: String::new() }
    }

    fn best_opposite(&self, taker_side: Side, limit: Option<i64>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.resting.iter().enumerate() {
            if o.side == taker_side {
                continue;
            }
            let crosses = match (taker_side, limit) {
                (_, None) => true,
                (Side::Buy, Some(l)) => o.ticks <= l,
                (Side::Sell, Some(l)) => o.ticks >= l,
            };
            if !crosses {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let b = &self.resting[j];
                    let better = match taker_side {
                        Side::Buy => {
                            o.ticks < b.ticks || (o.ticks == b.ticks && o.arrival < b.arrival)
                        }
                        Side::Sell => {
                            o.ticks > b.ticks || (o.ticks == b.ticks && o.arrival < b.arrival)
                        }
                    };
                    if better {
                        Some(i)
                    } else {
                        Some(j)
                    }
                }
            };
        }
        best
    }

    fn execute(
        &mut self,
        taker_order: OrderId,
        taker_account: AccountId,
        taker_side: Side,
        limit: Option<i64>,
        qty: Qty,
        mut budget: Option<i64>,
    ) -> Qty {
        let mut remaining = qty;
        while remaining > 0 {
            let Some(i) = self.best_opposite(taker_side, limit) else { break };
            let price = self.resting[i].ticks;
            let mut q = remaining.min(self.resting[i].remaining);
            if let Some(b) = budget {
                let affordable = (b / price).max(0) as Qty;
                q = q.min(affordable);
                if q == 0 {
                    break;
                }
            }
            let maker = &mut self.resting[i];
            self.log.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.next_trade_id,
                0,
                Price::from_ticks(price).unwrap(),
                q,
                maker.order_id,
                taker_order,
                maker.account,
                taker_account
            ));
            self.next_trade_id += 1;
            maker.remaining -= q;
            remaining -= q;
            if let Some(b) = budget.as_mut() {
                *b -= price * q as i64;
            }
            if maker.remaining == 0 {
                self.resting.remove(i);
            }
        }
        remaining
    }

    pub fn apply(&mut self, op: Op) {
        match op {
            Op::Limit { id, account, side, ticks, qty } => {
                let left = self.execute(id, account, side, Some(ticks), qty, None);
                if left > 0 {
                    let arrival = self.next_arrival;
                    self.next_arrival += 1;
                    self.resting.push(NaiveOrder {
                        order_id: id,
                        account,
                        side,
                        ticks,
                        remaining: left,
                        arrival,
                    });
                }
            }
            Op::Market { id, account, side, qty, budget } => {
                self.execute(id, account, side, None, qty, budget);
            }
            Op::Cancel { id } => {
                self.resting.retain(|o| o.order_id != id);
            }
        }
    }

    pub fn best_bid(&self) -> Option<i64> {
        self.resting.iter().filter(|o| o.side == Side::Buy).map(|o| o.ticks).max()
    }

    pub fn best_ask(&self) -> Option<i64> {
        self.resting.iter().filter(|o| o.side == Side::Sell).map(|o| o.ticks).min()
    }

    pub fn resting_count(&self) -> usize {
        self.resting.len()
    }
}

/// Drive the production book over a stream, returning its trade log.
pub fn run_production(ops: &[Op]) -> (String, OrderBook) {
    let mut book = OrderBook::new(0);
    let mut log = String::new();
    for &op in ops {
        let placement = match op {
            Op::Limit { id, account, side, ticks, qty } => book
                .place_limit(id, account, side, Price::from_ticks(ticks).unwrap(), qty)
                .unwrap(),
            Op::Market { id, account, side, qty, budget } => {
                book.place_market(id, account, side, qty, budget).unwrap()
            }
            Op::Cancel { id } => {
                book.cancel(id);
                continue;
            }
        };
        for t in &placement.trades {
            log.push_str(&t.log_line());
            log.push('\n');
        }
    }
    (log, book)
}

/// Drive the reference matcher over the same stream.
pub fn run_naive(ops: &[Op]) -> (String, NaiveBook) {
    let mut book = NaiveBook::new();
    for &op in ops {
        book.apply(op);
    }
    let log = std::mem::take(&mut book.log);
    (log, book)
}
