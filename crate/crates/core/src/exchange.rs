//! The exchange: books, accounts, settlement and the event ledger.
//!
//! All mutating operations take a single internal lock, so every submit or
//! cancel is atomic: validation, reservation, matching, settlement and event
//! emission happen as one step. The append-only event log captures every
//! request; [`replay_log`] rebuilds an exchange by re-issuing the logged
//! requests and verifying that matching regenerates the identical log.

use crate::book::{DepthLevel, OrderBook, Placement, Quote, RestingOrder};
use crate::clock::SimClock;
use crate::events::{CancelOrigin, Event, EventBody, EventParseError, OrderDesc};
use crate::ledger::{
    conservation_audit, Account, AccountKind, AuditReport, Escrow, EscrowTable, Totals,
};
use crate::types::{format_cents, AccountId, AssetId, Cents, OrderId, Price, Qty, Side};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Why an order was not accepted. The wire protocol carries these as
/// `reason=<str>` fields, so every variant has a stable string form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("market is closed")]
    MarketClosed,
    #[error("unknown asset")]
    UnknownAsset,
    #[error("unknown account")]
    UnknownAccount,
    #[error("not the owner of this resource")]
    NotOwner,
    #[error("order is malformed")]
    InvalidOrder,
    #[error("insufficient free cash")]
    InsufficientFunds,
    #[error("insufficient free shares")]
    InsufficientShares,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::MarketClosed => "market_closed",
            Rejection::UnknownAsset => "unknown_asset",
            Rejection::UnknownAccount => "unknown_account",
            Rejection::NotOwner => "not_owner",
            Rejection::InvalidOrder => "invalid_order",
            Rejection::InsufficientFunds => "insufficient_funds",
            Rejection::InsufficientShares => "insufficient_shares",
        }
    }

    pub fn parse(s: &str) -> Option<Rejection> {
        Some(match s {
            "market_closed" => Rejection::MarketClosed,
            "unknown_asset" => Rejection::UnknownAsset,
            "unknown_account" => Rejection::UnknownAccount,
            "not_owner" => Rejection::NotOwner,
            "invalid_order" => Rejection::InvalidOrder,
            "insufficient_funds" => Rejection::InsufficientFunds,
            "insufficient_shares" => Rejection::InsufficientShares,
            _ => return None,
        })
    }
}

/// An order as submitted: `price = None` means a market order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderSpec {
    pub asset: AssetId,
    pub side: Side,
    pub qty: Qty,
    pub price: Option<Price>,
}

impl OrderSpec {
    pub fn limit(asset: AssetId, side: Side, price: Price, qty: Qty) -> OrderSpec {
        OrderSpec { asset, side, qty, price: Some(price) }
    }

    pub fn market(asset: AssetId, side: Side, qty: Qty) -> OrderSpec {
        OrderSpec { asset, side, qty, price: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderAck {
    pub order_id: OrderId,
    pub filled: Qty,
    pub resting: Qty,
    pub unfilled: Qty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteView {
    pub bid: Option<Price>,
    pub ask: Option<Price>,
    pub mid: Option<f64>,
}

impl From<Quote> for QuoteView {
    fn from(q: Quote) -> QuoteView {
        QuoteView { bid: q.bid, ask: q.ask, mid: q.mid() }
    }
}

/// Per-asset market statistics maintained by the exchange.
#[derive(Debug, Default, Clone)]
pub struct MarketInfo {
    /// Total executed volume in shares.
    pub v_total: u64,
    /// `(t, mid)` appended whenever a trade prints or the best quote moves.
    pub mid_history: Vec<(f64, f64)>,
    /// `(t, bid_ticks, ask_ticks)` appended on best-quote changes.
    pub quote_history: Vec<(f64, Option<i64>, Option<i64>)>,
}

struct ExchangeState {
    books: Vec<OrderBook>,
    accounts: Vec<Account>,
    infos: Vec<MarketInfo>,
    escrows: EscrowTable,
    events: Vec<Event>,
    next_order_id: OrderId,
    next_event_seq: u64,
    t_close: f64,
    open: bool,
    baseline: Totals,
}

pub struct Exchange {
    state: Mutex<ExchangeState>,
    clock: Arc<SimClock>,
}

impl Exchange {
    pub fn new(assets: u32, t_close: f64, clock: Arc<SimClock>) -> Exchange {
        assert!(assets > 0, "market needs at least one asset");
        let mut state = ExchangeState {
            books: (0..assets).map(OrderBook::new).collect(),
            accounts: Vec::new(),
            infos: vec![MarketInfo::default(); assets as usize],
            escrows: EscrowTable::default(),
            events: Vec::new(),
            next_order_id: 1,
            next_event_seq: 1,
            t_close,
            open: true,
            baseline: Totals::new(assets as usize),
        };
        let t = clock.now();
        push_event(&mut state, t, EventBody::MarketOpen { assets, t_close });
        Exchange { state: Mutex::new(state), clock }
    }

    pub fn clock(&self) -> &Arc<SimClock> {
        &self.clock
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn asset_count(&self) -> u32 {
        self.state.lock().unwrap().books.len() as u32
    }

    pub fn t_close(&self) -> f64 {
        self.state.lock().unwrap().t_close
    }

    /// Creates an account and returns its id. Standard accounts must start
    /// with non-negative cash and holdings.
    pub fn create_account(&self, kind: AccountKind, cash: Cents, holdings: Vec<i64>) -> AccountId {
        let mut st = self.state.lock().unwrap();
        assert_eq!(holdings.len(), st.books.len(), "holdings must cover every asset");
        if kind == AccountKind::Standard {
            assert!(cash >= 0 && holdings.iter().all(|&h| h >= 0));
        }
        let id = st.accounts.len() as AccountId;
        let account = Account::new(id, kind, cash, holdings.clone());
        st.baseline.add_account(&account);
        st.accounts.push(account);
        let t = self.clock.now();
        push_event(&mut st, t, EventBody::AccountCreated { account: id, kind, cash, holdings });
        id
    }

    /// Validates, reserves, matches and settles one order atomically.
    pub fn submit_order(&self, account: AccountId, spec: OrderSpec) -> Result<OrderAck, Rejection> {
        let mut st = self.state.lock().unwrap();
        let t = self.clock.now();
        let result = submit_locked(&mut st, t, account, spec);
        if let Err(reason) = result {
            let desc = OrderDesc {
                account,
                asset: spec.asset,
                side: spec.side,
                qty: spec.qty,
                price: spec.price,
            };
            push_event(
                &mut st,
                t,
                EventBody::OrderRejected { desc, reason: reason.as_str().into() },
            );
        }
        result
    }

    /// Cancels a resting order. Returns the quantity released; unknown,
    /// finished or foreign orders cancel zero, so retries are safe.
    pub fn cancel_order(
        &self,
        account: AccountId,
        asset: AssetId,
        order_id: OrderId,
    ) -> Result<Qty, Rejection> {
        let mut st = self.state.lock().unwrap();
        if account as usize >= st.accounts.len() {
            return Err(Rejection::UnknownAccount);
        }
        if asset as usize >= st.books.len() {
            return Err(Rejection::UnknownAsset);
        }
        let t = self.clock.now();
        let st = &mut *st;
        let owner = st.books[asset as usize].resting_owner(order_id);
        let qty = if owner == Some(account) {
            let before = st.books[asset as usize].quote();
            let q = st.books[asset as usize].cancel(order_id);
            let acct = &mut st.accounts[account as usize];
            st.escrows.close(order_id, acct);
            let after = st.books[asset as usize].quote();
            record_quote_change(st, t, asset, before, after);
            q
        } else {
            0
        };
        push_event(
            st,
            t,
            EventBody::OrderCancelled { order: order_id, account, asset, qty, by: CancelOrigin::Client },
        );
        Ok(qty)
    }

    pub fn quote(&self, asset: AssetId) -> Result<QuoteView, Rejection> {
        let st = self.state.lock().unwrap();
        let book = st.books.get(asset as usize).ok_or(Rejection::UnknownAsset)?;
        Ok(book.quote().into())
    }

    pub fn depth(
        &self,
        asset: AssetId,
        levels: usize,
    ) -> Result<(Vec<DepthLevel>, Vec<DepthLevel>), Rejection> {
        let st = self.state.lock().unwrap();
        let book = st.books.get(asset as usize).ok_or(Rejection::UnknownAsset)?;
        Ok(book.depth(levels))
    }

    /// Mid-price history points with `t >= since`.
    pub fn history(&self, asset: AssetId, since: f64) -> Result<Vec<(f64, f64)>, Rejection> {
        let st = self.state.lock().unwrap();
        let info = st.infos.get(asset as usize).ok_or(Rejection::UnknownAsset)?;
        let start = info.mid_history.partition_point(|&(t, _)| t < since);
        Ok(info.mid_history[start..].to_vec())
    }

    pub fn volume(&self, asset: AssetId) -> Result<u64, Rejection> {
        let st = self.state.lock().unwrap();
        Ok(st.infos.get(asset as usize).ok_or(Rejection::UnknownAsset)?.v_total)
    }

    /// Account state, visible only to the account itself. Ownership is
    /// checked before existence so foreign probes cannot enumerate accounts.
    pub fn account_view(
        &self,
        requester: Option<AccountId>,
        id: AccountId,
    ) -> Result<Account, Rejection> {
        if requester != Some(id) {
            return Err(Rejection::NotOwner);
        }
        let st = self.state.lock().unwrap();
        let account = st.accounts.get(id as usize).ok_or(Rejection::UnknownAccount)?;
        Ok(account.clone())
    }

    pub fn is_open(&self) -> bool {
        let st = self.state.lock().unwrap();
        st.open && self.clock.now() < st.t_close
    }

    /// Cancels all resting orders and closes the market. Idempotent.
    pub fn close_market(&self) {
        let mut st = self.state.lock().unwrap();
        if !st.open {
            return;
        }
        let t = self.clock.now();
        let st = &mut *st;
        for k in 0..st.books.len() {
            let before = st.books[k].quote();
            for (order, account, qty) in st.books[k].cancel_all() {
                let acct = &mut st.accounts[account as usize];
                st.escrows.close(order, acct);
                push_event(
                    st,
                    t,
                    EventBody::OrderCancelled {
                        order,
                        account,
                        asset: k as AssetId,
                        qty,
                        by: CancelOrigin::Close,
                    },
                );
            }
            let after = st.books[k].quote();
            record_quote_change(st, t, k as AssetId, before, after);
        }
        push_event(st, t, EventBody::MarketClose);
        st.open = false;
    }

    /// Diffs current wealth totals against the all-accounts baseline.
    pub fn audit(&self) -> AuditReport {
        let st = self.state.lock().unwrap();
        conservation_audit(&st.accounts, &st.baseline)
    }

    /// Every account's current state; in-process callers only — the wire
    /// protocol exposes accounts solely to their owners.
    pub fn accounts_snapshot(&self) -> Vec<Account> {
        self.state.lock().unwrap().accounts.clone()
    }

    pub fn market_info(&self, asset: AssetId) -> Result<MarketInfo, Rejection> {
        let st = self.state.lock().unwrap();
        st.infos.get(asset as usize).cloned().ok_or(Rejection::UnknownAsset)
    }

    /// Drains buffered events (the log's global sequence keeps counting).
    pub fn take_events(&self) -> Vec<Event> {
        std::mem::take(&mut self.state.lock().unwrap().events)
    }

    /// Currently buffered (undrained) events, one encoded line each.
    pub fn event_lines(&self) -> Vec<String> {
        self.state.lock().unwrap().events.iter().map(Event::encode).collect()
    }

    pub fn write_event_log(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for line in self.event_lines() {
            writeln!(f, "{line}")?;
        }
        f.flush()
    }

    /// Canonical dump of all mutable state; equal dumps mean equal exchanges.
    pub fn state_dump(&self) -> String {
        let st = self.state.lock().unwrap();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "exchange assets={} t_close={} open={} next_order_id={} next_event_seq={}",
            st.books.len(),
            st.t_close,
            st.open,
            st.next_order_id,
            st.next_event_seq
        );
        for a in &st.accounts {
            let holdings: Vec<String> = a.holdings.iter().map(|h| h.to_string()).collect();
            let reserved: Vec<String> = a.reserved_shares.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(
                out,
                "account id={} kind={} cash={} holdings={} reserved_cash={} reserved_shares={}",
                a.id,
                a.kind.as_str(),
                format_cents(a.cash),
                holdings.join(","),
                format_cents(a.reserved_cash),
                reserved.join(",")
            );
        }
        for (k, book) in st.books.iter().enumerate() {
            let _ = writeln!(out, "book asset={k} v_total={}", st.infos[k].v_total);
            for o in book.resting_orders() {
                let _ = writeln!(
                    out,
                    "order asset={k} order={} account={} side={} price={} qty={} seq={}",
                    o.order_id,
                    o.account,
                    o.side.as_str(),
                    o.price,
                    o.remaining,
                    o.submitted_seq
                );
            }
        }
        out
    }

    /// Writes a restart snapshot: accounts, resting orders and counters.
    /// Price history is not included; a restored exchange starts a fresh one.
    pub fn write_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let st = self.state.lock().unwrap();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            f,
            "snapshot t={} assets={} t_close={} open={} next_order_id={} next_event_seq={}",
            self.clock.now(),
            st.books.len(),
            st.t_close,
            st.open as u8,
            st.next_order_id,
            st.next_event_seq
        )?;
        writeln!(f, "baseline cash={} shares={}", format_cents(st.baseline.cash), join_i64(&st.baseline.shares))?;
        for a in &st.accounts {
            writeln!(
                f,
                "account id={} kind={} cash={} holdings={}",
                a.id,
                a.kind.as_str(),
                format_cents(a.cash),
                join_i64(&a.holdings)
            )?;
        }
        for (k, book) in st.books.iter().enumerate() {
            let (next_seq, next_trade_id) = book.counters();
            writeln!(
                f,
                "bookctr asset={k} next_seq={next_seq} next_trade_id={next_trade_id} v_total={}",
                st.infos[k].v_total
            )?;
            for o in book.resting_orders() {
                writeln!(
                    f,
                    "order asset={k} order={} account={} side={} price={} qty={} seq={}",
                    o.order_id,
                    o.account,
                    o.side.as_str(),
                    o.price,
                    o.remaining,
                    o.submitted_seq
                )?;
            }
        }
        f.flush()
    }

    /// Rebuilds an exchange from a snapshot file. Escrow reservations are
    /// recomputed from the resting orders themselves.
    pub fn load_snapshot(path: &Path) -> Result<Exchange, SnapshotError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| SnapshotError::bad(1, "empty snapshot"))?;
        let hd = SnapFields::parse(1, header)?;
        if hd.tag != "snapshot" {
            return Err(SnapshotError::bad(1, "missing snapshot header"));
        }
        let t: f64 = hd.float("t")?;
        let assets: u32 = hd.int("assets")?;
        let clock = Arc::new(SimClock::virtual_at(t));
        let mut state = ExchangeState {
            books: (0..assets).map(OrderBook::new).collect(),
            accounts: Vec::new(),
            infos: vec![MarketInfo::default(); assets as usize],
            escrows: EscrowTable::default(),
            events: Vec::new(),
            next_order_id: hd.int("next_order_id")?,
            next_event_seq: hd.int("next_event_seq")?,
            t_close: hd.float("t_close")?,
            open: hd.int::<u8>("open")? == 1,
            baseline: Totals::new(assets as usize),
        };
        let mut pending: Vec<(usize, SnapRestingOrder)> = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let no = idx + 1;
            let f = SnapFields::parse(no, line)?;
            match f.tag {
                "baseline" => {
                    state.baseline.cash = f.cents("cash")?;
                    state.baseline.shares = f.int_list("shares")?;
                }
                "account" => {
                    let id: AccountId = f.int("id")?;
                    let kind = AccountKind::parse(f.str("kind")?)
                        .ok_or_else(|| SnapshotError::bad(no, "bad account kind"))?;
                    let cash = f.cents("cash")?;
                    let holdings = f.int_list("holdings")?;
                    if id as usize != state.accounts.len() || holdings.len() != assets as usize {
                        return Err(SnapshotError::bad(no, "account record out of order"));
                    }
                    state.accounts.push(Account::new(id, kind, cash, holdings));
                }
                "bookctr" => {
                    let k: usize = f.int("asset")?;
                    let book = state
                        .books
                        .get_mut(k)
                        .ok_or_else(|| SnapshotError::bad(no, "unknown asset"))?;
                    book.set_counters(f.int("next_seq")?, f.int("next_trade_id")?);
                    state.infos[k].v_total = f.int("v_total")?;
                }
                "order" => {
                    let k: usize = f.int("asset")?;
                    if k >= assets as usize {
                        return Err(SnapshotError::bad(no, "unknown asset"));
                    }
                    pending.push((
                        no,
                        SnapRestingOrder {
                            asset: k as AssetId,
                            order: f.int("order")?,
                            account: f.int("account")?,
                            side: Side::parse(f.str("side")?)
                                .ok_or_else(|| SnapshotError::bad(no, "bad side"))?,
                            price: Price::parse(f.str("price")?)
                                .ok_or_else(|| SnapshotError::bad(no, "bad price"))?,
                            qty: f.int("qty")?,
                            seq: f.int("seq")?,
                        },
                    ));
                }
                other => return Err(SnapshotError::bad(no, &format!("unknown record {other:?}"))),
            }
        }
        pending.sort_by_key(|(_, o)| o.seq);
        for (no, o) in pending {
            if o.account as usize >= state.accounts.len() {
                return Err(SnapshotError::bad(no, "order references unknown account"));
            }
            state.books[o.asset as usize].restore_resting(RestingOrder {
                order_id: o.order,
                account: o.account,
                side: o.side,
                price: o.price,
                remaining: o.qty,
                submitted_seq: o.seq,
            });
            let account = &mut state.accounts[o.account as usize];
            if account.kind == AccountKind::Standard {
                let escrow = match o.side {
                    Side::Buy => Escrow {
                        account: o.account,
                        asset: o.asset,
                        side: o.side,
                        price: Some(o.price),
                        cash: o.price.cost(o.qty),
                        shares: 0,
                    },
                    Side::Sell => Escrow {
                        account: o.account,
                        asset: o.asset,
                        side: o.side,
                        price: Some(o.price),
                        cash: 0,
                        shares: o.qty,
                    },
                };
                state.escrows.open(o.order, escrow, account);
            }
        }
        Ok(Exchange { state: Mutex::new(state), clock })
    }
}

struct SnapRestingOrder {
    asset: AssetId,
    order: OrderId,
    account: AccountId,
    side: Side,
    price: Price,
    qty: Qty,
    seq: u64,
}

fn join_i64(xs: &[i64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot line {line}: {what}")]
    Malformed { line: usize, what: String },
}

impl SnapshotError {
    fn bad(line: usize, what: &str) -> SnapshotError {
        SnapshotError::Malformed { line, what: what.to_string() }
    }
}

/// Tagged `key=value` record used by the snapshot format.
struct SnapFields<'a> {
    line: usize,
    tag: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> SnapFields<'a> {
    fn parse(line_no: usize, line: &'a str) -> Result<SnapFields<'a>, SnapshotError> {
        let mut toks = line.split_ascii_whitespace();
        let tag = toks.next().ok_or_else(|| SnapshotError::bad(line_no, "empty record"))?;
        let mut pairs = Vec::new();
        for tok in toks {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| SnapshotError::bad(line_no, "token is not key=value"))?;
            pairs.push((k, v));
        }
        Ok(SnapFields { line: line_no, tag, pairs })
    }

    fn str(&self, key: &str) -> Result<&'a str, SnapshotError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| SnapshotError::bad(self.line, &format!("missing field {key}")))
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T, SnapshotError> {
        self.str(key)?
            .parse()
            .map_err(|_| SnapshotError::bad(self.line, &format!("bad integer in {key}")))
    }

    fn float(&self, key: &str) -> Result<f64, SnapshotError> {
        self.str(key)?
            .parse()
            .map_err(|_| SnapshotError::bad(self.line, &format!("bad number in {key}")))
    }

    fn cents(&self, key: &str) -> Result<Cents, SnapshotError> {
        crate::types::parse_cents(self.str(key)?)
            .ok_or_else(|| SnapshotError::bad(self.line, &format!("bad amount in {key}")))
    }

    fn int_list(&self, key: &str) -> Result<Vec<i64>, SnapshotError> {
        self.str(key)?
            .split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| SnapshotError::bad(self.line, &format!("bad list in {key}")))
            })
            .collect()
    }
}

fn push_event(st: &mut ExchangeState, t: f64, body: EventBody) {
    let seq = st.next_event_seq;
    st.next_event_seq += 1;
    st.events.push(Event { seq, t, body });
}

fn submit_locked(
    st: &mut ExchangeState,
    t: f64,
    account: AccountId,
    spec: OrderSpec,
) -> Result<OrderAck, Rejection> {
    if spec.asset as usize >= st.books.len() {
        return Err(Rejection::UnknownAsset);
    }
    if account as usize >= st.accounts.len() {
        return Err(Rejection::UnknownAccount);
    }
    if !st.open || t >= st.t_close {
        return Err(Rejection::MarketClosed);
    }
    if spec.qty == 0 {
        return Err(Rejection::InvalidOrder);
    }
    let kind = st.accounts[account as usize].kind;

    // Reservation check and escrow sizing (standard accounts only).
    let mut budget = None;
    let escrow = if kind == AccountKind::Standard {
        let acct = &st.accounts[account as usize];
        match spec.side {
            Side::Buy => {
                let unit_price = match spec.price {
                    Some(p) => p,
                    // Market buys reserve at the current best ask; with no
                    // ask there is nothing to price the reservation against.
                    None => match st.books[spec.asset as usize].best_ask() {
                        Some(p) => p,
                        None => return Err(Rejection::InsufficientFunds),
                    },
                };
                let need = unit_price.cost(spec.qty);
                if acct.free_cash() < need {
                    return Err(Rejection::InsufficientFunds);
                }
                if spec.price.is_none() {
                    budget = Some(need);
                }
                Some(Escrow {
                    account,
                    asset: spec.asset,
                    side: Side::Buy,
                    price: spec.price,
                    cash: need,
                    shares: 0,
                })
            }
            Side::Sell => {
                if acct.free_shares(spec.asset) < spec.qty as i64 {
                    return Err(Rejection::InsufficientShares);
                }
                Some(Escrow {
                    account,
                    asset: spec.asset,
                    side: Side::Sell,
                    price: spec.price,
                    cash: 0,
                    shares: spec.qty,
                })
            }
        }
    } else {
        None
    };

    let order_id = st.next_order_id;
    st.next_order_id += 1;
    if let Some(e) = escrow {
        let acct = &mut st.accounts[account as usize];
        st.escrows.open(order_id, e, acct);
    }
    push_event(
        st,
        t,
        EventBody::OrderAccepted {
            order: order_id,
            desc: OrderDesc {
                account,
                asset: spec.asset,
                side: spec.side,
                qty: spec.qty,
                price: spec.price,
            },
        },
    );

    let book = &mut st.books[spec.asset as usize];
    let quote_before = book.quote();
    let placement = match spec.price {
        Some(p) => book.place_limit(order_id, account, spec.side, p, spec.qty),
        None => book.place_market(order_id, account, spec.side, spec.qty, budget),
    }
    .expect("quantity validated above");

    settle(st, t, &placement);

    // A market order is finished after matching; release any unspent escrow.
    // A limit order keeps its escrow while any part of it rests.
    if spec.price.is_none() || placement.resting == 0 {
        let acct = &mut st.accounts[account as usize];
        st.escrows.close(order_id, acct);
    }

    let quote_after = st.books[spec.asset as usize].quote();
    record_market_info(st, t, spec.asset, &placement, quote_before, quote_after);

    Ok(OrderAck {
        order_id,
        filled: placement.filled(),
        resting: placement.resting,
        unfilled: placement.unfilled,
    })
}

/// Moves cash and shares for each trade and releases the consumed escrow.
fn settle(st: &mut ExchangeState, t: f64, placement: &Placement) {
    for trade in &placement.trades {
        let (buyer_order, buyer_acct, seller_order, seller_acct) = match trade.taker_side {
            Side::Buy => (trade.taker_order, trade.taker_account, trade.maker_order, trade.maker_account),
            Side::Sell => (trade.maker_order, trade.maker_account, trade.taker_order, trade.taker_account),
        };
        let cost = trade.price.cost(trade.qty);
        let k = trade.asset as usize;
        {
            let buyer = &mut st.accounts[buyer_acct as usize];
            buyer.cash -= cost;
            buyer.holdings[k] += trade.qty as i64;
            st.escrows.on_fill(buyer_order, trade.qty, buyer);
            debug_assert!(buyer.kind == AccountKind::Dealer || buyer.cash >= 0);
        }
        {
            let seller = &mut st.accounts[seller_acct as usize];
            seller.cash += cost;
            seller.holdings[k] -= trade.qty as i64;
            st.escrows.on_fill(seller_order, trade.qty, seller);
            debug_assert!(seller.kind == AccountKind::Dealer || seller.holdings[k] >= 0);
        }
        // A fully-filled maker's escrow is now empty; drop the entry.
        if st.books[k].resting_qty(trade.maker_order).is_none() {
            let maker = &mut st.accounts[trade.maker_account as usize];
            st.escrows.close(trade.maker_order, maker);
        }
        push_event(
            st,
            t,
            EventBody::TradeSettled {
                trade: trade.trade_id,
                asset: trade.asset,
                price: trade.price,
                qty: trade.qty,
                maker_order: trade.maker_order,
                taker_order: trade.taker_order,
                maker_acct: trade.maker_account,
                taker_acct: trade.taker_account,
            },
        );
    }
}

fn record_market_info(
    st: &mut ExchangeState,
    t: f64,
    asset: AssetId,
    placement: &Placement,
    before: Quote,
    after: Quote,
) {
    st.infos[asset as usize].v_total += placement.filled();
    record_quote_change(st, t, asset, before, after);
}

/// Appends quote/mid history points whenever the best quote moves. The mid
/// series records value changes only; consumers rebuild prevailing values
/// by carrying the last point forward.
fn record_quote_change(st: &mut ExchangeState, t: f64, asset: AssetId, before: Quote, after: Quote) {
    if before == after {
        return;
    }
    let info = &mut st.infos[asset as usize];
    info.quote_history.push((t, after.bid.map(Price::ticks), after.ask.map(Price::ticks)));
    if let Some(mid) = after.mid() {
        if info.mid_history.last().map(|&(_, m)| m) != Some(mid) {
            info.mid_history.push((t, mid));
        }
    }
}

/// Errors from rebuilding an exchange out of an event log.
#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: EventParseError },
    #[error("line {line}: {what}")]
    Protocol { line: usize, what: String },
    #[error("line {line}: replay diverged\n  logged:   {expected}\n  replayed: {got}")]
    Divergence { line: usize, expected: String, got: String },
}

/// Rebuilds an exchange by re-issuing every logged request in order.
///
/// Settlements and close-cancels are regenerated by matching, not read back,
/// and the regenerated log must reproduce the input byte for byte. A log
/// truncated at any line boundary replays to the state at the truncation
/// point (the final atomic group may complete past the end of the input).
pub fn replay_log(lines: &[String]) -> Result<Exchange, ReplayError> {
    let mut events = Vec::with_capacity(lines.len());
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev = Event::parse(line)
            .map_err(|source| ReplayError::Parse { line: idx + 1, source })?;
        let expected_seq = events.len() as u64 + 1;
        if ev.seq != expected_seq {
            return Err(ReplayError::Protocol {
                line: idx + 1,
                what: format!("sequence {} out of order (expected {expected_seq})", ev.seq),
            });
        }
        events.push(ev);
    }
    let Some(first) = events.first() else {
        return Err(ReplayError::Protocol { line: 1, what: "log is empty".into() });
    };
    let EventBody::MarketOpen { assets, t_close } = first.body else {
        return Err(ReplayError::Protocol { line: 1, what: "log must start with market_open".into() });
    };
    let clock = Arc::new(SimClock::virtual_at(first.t));
    let exchange = Exchange::new(assets, t_close, Arc::clone(&clock));

    // Compares freshly generated events against the logged ones as we go.
    let mut cursor = 1usize;
    let check = |ex: &Exchange, cursor: &mut usize, done: bool| -> Result<(), ReplayError> {
        let st = ex.state.lock().unwrap();
        while *cursor < st.events.len() {
            let got = st.events[*cursor].encode();
            match events.get(*cursor) {
                Some(expected) => {
                    let want = expected.encode();
                    if want != got {
                        return Err(ReplayError::Divergence {
                            line: *cursor + 1,
                            expected: want,
                            got,
                        });
                    }
                }
                // Generated past the end of a truncated log: only legal for
                // the tail of the final atomic group.
                None if done => {}
                None => {
                    return Err(ReplayError::Protocol {
                        line: *cursor + 1,
                        what: format!("log truncated inside an atomic group: {got}"),
                    })
                }
            }
            *cursor += 1;
        }
        Ok(())
    };

    let mut idx = 1usize;
    while idx < events.len() {
        let ev = &events[idx];
        clock.set(ev.t);
        match &ev.body {
            EventBody::AccountCreated { account, kind, cash, holdings } => {
                let id = exchange.create_account(*kind, *cash, holdings.clone());
                if id != *account {
                    return Err(ReplayError::Protocol {
                        line: idx + 1,
                        what: format!("account id {id} regenerated, log says {account}"),
                    });
                }
            }
            EventBody::OrderAccepted { order, desc } => {
                let spec = OrderSpec {
                    asset: desc.asset,
                    side: desc.side,
                    qty: desc.qty,
                    price: desc.price,
                };
                match exchange.submit_order(desc.account, spec) {
                    Ok(ack) if ack.order_id == *order => {}
                    Ok(ack) => {
                        return Err(ReplayError::Protocol {
                            line: idx + 1,
                            what: format!("order id {} regenerated, log says {order}", ack.order_id),
                        })
                    }
                    Err(r) => {
                        return Err(ReplayError::Protocol {
                            line: idx + 1,
                            what: format!("logged accept was rejected on replay: {}", r.as_str()),
                        })
                    }
                }
            }
            EventBody::OrderRejected { desc, .. } => {
                let spec = OrderSpec {
                    asset: desc.asset,
                    side: desc.side,
                    qty: desc.qty,
                    price: desc.price,
                };
                if exchange.submit_order(desc.account, spec).is_ok() {
                    return Err(ReplayError::Protocol {
                        line: idx + 1,
                        what: "logged rejection was accepted on replay".into(),
                    });
                }
            }
            EventBody::OrderCancelled { order, account, asset, by, .. } => {
                if *by == CancelOrigin::Client {
                    exchange.cancel_order(*account, *asset, *order).map_err(|r| {
                        ReplayError::Protocol {
                            line: idx + 1,
                            what: format!("cancel failed on replay: {}", r.as_str()),
                        }
                    })?;
                }
                // Close-cancels are regenerated by market_close.
            }
            EventBody::TradeSettled { .. } => {} // regenerated by matching
            EventBody::MarketClose => exchange.close_market(),
            EventBody::MarketOpen { .. } => {
                return Err(ReplayError::Protocol {
                    line: idx + 1,
                    what: "duplicate market_open".into(),
                })
            }
        }
        idx += 1;
        // Skip over input events that replay regenerates rather than re-issues.
        while idx < events.len() {
            match &events[idx].body {
                EventBody::TradeSettled { .. } => idx += 1,
                EventBody::OrderCancelled { by: CancelOrigin::Close, .. } => idx += 1,
                _ => break,
            }
        }
        check(&exchange, &mut cursor, idx >= events.len())?;
    }
    check(&exchange, &mut cursor, true)?;
    Ok(exchange)
}

/// Reads an event log file and replays it.
pub fn replay_log_file(path: &Path) -> Result<Exchange, ReplayFileError> {
    let f = std::fs::File::open(path)?;
    let lines: Vec<String> =
        std::io::BufReader::new(f).lines().collect::<Result<_, _>>()?;
    Ok(replay_log(&lines)?)
}

#[derive(Debug, Error)]
pub enum ReplayFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}
