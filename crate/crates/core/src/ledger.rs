//! Accounts, escrow bookkeeping and the conservation audit.
//!
//! Standard accounts reserve cash or shares when an order is accepted, so a
//! resting order can never be over-committed by later submissions. Dealer
//! accounts skip reservations entirely and may run negative cash or short
//! holdings.

use crate::types::{AccountId, AssetId, Cents, OrderId, Price, Qty, Side};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccountKind {
    Standard,
    Dealer,
}

impl AccountKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccountKind::Standard => "standard",
            AccountKind::Dealer => "dealer",
        }
    }

    pub fn parse(s: &str) -> Option<AccountKind> {
        match s {
            "standard" => Some(AccountKind::Standard),
            "dealer" => Some(AccountKind::Dealer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub kind: AccountKind,
    pub cash: Cents,
    pub holdings: Vec<i64>,
    pub reserved_cash: Cents,
    pub reserved_shares: Vec<i64>,
}

impl Account {
    pub fn new(id: AccountId, kind: AccountKind, cash: Cents, holdings: Vec<i64>) -> Account {
        let n = holdings.len();
        Account { id, kind, cash, holdings, reserved_cash: 0, reserved_shares: vec![0; n] }
    }

    /// Cash not committed to resting buy orders.
    pub fn free_cash(&self) -> Cents {
        self.cash - self.reserved_cash
    }

    /// Shares of `asset` not committed to resting sell orders.
    pub fn free_shares(&self, asset: AssetId) -> i64 {
        self.holdings[asset as usize] - self.reserved_shares[asset as usize]
    }
}

/// Funds or shares set aside for one live order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Escrow {
    pub account: AccountId,
    pub asset: AssetId,
    pub side: Side,
    /// Limit price the cash reservation was computed at (buy limits only).
    pub price: Option<Price>,
    pub cash: Cents,
    pub shares: Qty,
}

/// Wealth totals used as the conservation baseline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub cash: Cents,
    pub shares: Vec<i64>,
}

impl Totals {
    pub fn new(assets: usize) -> Totals {
        Totals { cash: 0, shares: vec![0; assets] }
    }

    pub fn add_account(&mut self, account: &Account) {
        self.cash += account.cash;
        for (total, h) in self.shares.iter_mut().zip(&account.holdings) {
            *total += h;
        }
    }
}

/// Per-asset and cash deltas relative to a baseline; all zeros when clean.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub cash_delta: Cents,
    pub share_deltas: Vec<i64>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.cash_delta == 0 && self.share_deltas.iter().all(|&d| d == 0)
    }
}

/// Recomputes totals over all accounts and diffs them against the baseline.
/// Trading only moves value between accounts, so any nonzero delta means a
/// settlement bug (or deliberate corruption in tests).
pub fn conservation_audit<'a>(
    accounts: impl IntoIterator<Item = &'a Account>,
    baseline: &Totals,
) -> AuditReport {
    let mut now = Totals::new(baseline.shares.len());
    for a in accounts {
        now.add_account(a);
    }
    AuditReport {
        cash_delta: now.cash - baseline.cash,
        share_deltas: now
            .shares
            .iter()
            .zip(&baseline.shares)
            .map(|(n, b)| n - b)
            .collect(),
    }
}

/// Escrow table keyed by live order id.
#[derive(Debug, Default)]
pub struct EscrowTable {
    entries: HashMap<OrderId, Escrow>,
}

impl EscrowTable {
    pub fn get(&self, order: OrderId) -> Option<&Escrow> {
        self.entries.get(&order)
    }

    /// Reserves funds/shares on the account and records the escrow.
    pub fn open(&mut self, order: OrderId, escrow: Escrow, account: &mut Account) {
        account.reserved_cash += escrow.cash;
        account.reserved_shares[escrow.asset as usize] += escrow.shares as i64;
        let prev = self.entries.insert(order, escrow);
        debug_assert!(prev.is_none(), "escrow already open for order");
    }

    /// Releases the part of the reservation consumed by a fill of `qty`.
    pub fn on_fill(&mut self, order: OrderId, qty: Qty, account: &mut Account) {
        let Some(e) = self.entries.get_mut(&order) else { return };
        debug_assert_eq!(e.account, account.id);
        match e.side {
            Side::Buy => {
                let release = match e.price {
                    Some(p) => p.cost(qty).min(e.cash),
                    None => 0,
                };
                e.cash -= release;
                account.reserved_cash -= release;
            }
            Side::Sell => {
                let release = qty.min(e.shares);
                e.shares -= release;
                account.reserved_shares[e.asset as usize] -= release as i64;
            }
        }
    }

    /// Releases everything still reserved for `order` and drops the entry.
    pub fn close(&mut self, order: OrderId, account: &mut Account) {
        let Some(e) = self.entries.remove(&order) else { return };
        debug_assert_eq!(e.account, account.id);
        account.reserved_cash -= e.cash;
        account.reserved_shares[e.asset as usize] -= e.shares as i64;
    }

    pub fn owner(&self, order: OrderId) -> Option<AccountId> {
        self.entries.get(&order).map(|e| e.account)
    }
}
