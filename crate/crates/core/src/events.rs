//! Append-only exchange event ledger.
//!
//! Every state-changing request produces exactly one event (plus one per
//! settled trade), encoded as a single `key=value` line. The log is the
//! source of truth for replay: feeding the accepted/rejected/cancelled
//! requests back through a fresh exchange regenerates the same lines.

use crate::types::{
    format_cents, parse_cents, AccountId, AssetId, Cents, OrderId, Price, Qty, Side,
};
use crate::ledger::AccountKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct EventParseError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancelOrigin {
    Client,
    Close,
}

impl CancelOrigin {
    fn as_str(self) -> &'static str {
        match self {
            CancelOrigin::Client => "client",
            CancelOrigin::Close => "close",
        }
    }
}

/// Order details carried by accept/reject events; enough to re-submit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderDesc {
    pub account: AccountId,
    pub asset: AssetId,
    pub side: Side,
    pub qty: Qty,
    /// `Some` for limit orders, `None` for market orders.
    pub price: Option<Price>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    AccountCreated {
        account: AccountId,
        kind: AccountKind,
        cash: Cents,
        holdings: Vec<i64>,
    },
    MarketOpen {
        assets: u32,
        t_close: f64,
    },
    OrderAccepted {
        order: OrderId,
        desc: OrderDesc,
    },
    OrderRejected {
        desc: OrderDesc,
        reason: String,
    },
    TradeSettled {
        trade: u64,
        asset: AssetId,
        price: Price,
        qty: Qty,
        maker_order: OrderId,
        taker_order: OrderId,
        maker_acct: AccountId,
        taker_acct: AccountId,
    },
    OrderCancelled {
        order: OrderId,
        account: AccountId,
        asset: AssetId,
        qty: Qty,
        by: CancelOrigin,
    },
    MarketClose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub t: f64,
    pub body: EventBody,
}

impl Event {
    /// Encodes the event as one `key=value` line (no trailing newline).
    pub fn encode(&self) -> String {
        let mut s = format!("seq={} t={}", self.seq, self.t);
        match &self.body {
            EventBody::AccountCreated { account, kind, cash, holdings } => {
                let hs: Vec<String> = holdings.iter().map(|h| h.to_string()).collect();
                s.push_str(&format!(
                    " ev=account_created account={account} kind={} cash={} holdings={}",
                    kind.as_str(),
                    format_cents(*cash),
                    hs.join(",")
                ));
            }
            EventBody::MarketOpen { assets, t_close } => {
                s.push_str(&format!(" ev=market_open assets={assets} t_close={t_close}"));
            }
            EventBody::OrderAccepted { order, desc } => {
                s.push_str(&format!(" ev=order_accepted order={order}"));
                s.push_str(&desc.encode());
            }
            EventBody::OrderRejected { desc, reason } => {
                s.push_str(" ev=order_rejected");
                s.push_str(&desc.encode());
                s.push_str(&format!(" reason={reason}"));
            }
            EventBody::TradeSettled {
                trade,
                asset,
                price,
                qty,
                maker_order,
                taker_order,
                maker_acct,
                taker_acct,
            } => {
                s.push_str(&format!(
                    " ev=trade_settled trade={trade} asset={asset} price={price} qty={qty} \
                     maker_order={maker_order} taker_order={taker_order} \
                     maker_acct={maker_acct} taker_acct={taker_acct}"
                ));
            }
            EventBody::OrderCancelled { order, account, asset, qty, by } => {
                s.push_str(&format!(
                    " ev=order_cancelled order={order} account={account} asset={asset} qty={qty} by={}",
                    by.as_str()
                ));
            }
            EventBody::MarketClose => s.push_str(" ev=market_close"),
        }
        s
    }

    /// Parses a line produced by [`Event::encode`].
    pub fn parse(line: &str) -> Result<Event, EventParseError> {
        let kv = KvFields::parse(line)?;
        let seq = kv.int("seq")?;
        let t = kv.float("t")?;
        let ev = kv.str("ev")?;
        let body = match ev {
            "account_created" => EventBody::AccountCreated {
                account: kv.int("account")?,
                kind: AccountKind::parse(kv.str("kind")?)
                    .ok_or_else(|| EventParseError("bad account kind".into()))?,
                cash: kv.cents("cash")?,
                holdings: kv.int_list("holdings")?,
            },
            "market_open" => EventBody::MarketOpen {
                assets: kv.int::<u32>("assets")?,
                t_close: kv.float("t_close")?,
            },
            "order_accepted" => EventBody::OrderAccepted {
                order: kv.int("order")?,
                desc: OrderDesc::parse(&kv)?,
            },
            "order_rejected" => EventBody::OrderRejected {
                desc: OrderDesc::parse(&kv)?,
                reason: kv.str("reason")?.to_string(),
            },
            "trade_settled" => EventBody::TradeSettled {
                trade: kv.int("trade")?,
                asset: kv.int::<u32>("asset")?,
                price: kv.price("price")?,
                qty: kv.int("qty")?,
                maker_order: kv.int("maker_order")?,
                taker_order: kv.int("taker_order")?,
                maker_acct: kv.int("maker_acct")?,
                taker_acct: kv.int("taker_acct")?,
            },
            "order_cancelled" => EventBody::OrderCancelled {
                order: kv.int("order")?,
                account: kv.int("account")?,
                asset: kv.int::<u32>("asset")?,
                qty: kv.int("qty")?,
                by: match kv.str("by")? {
                    "client" => CancelOrigin::Client,
                    "close" => CancelOrigin::Close,
                    other => {
                        return Err(EventParseError(format!("bad cancel origin {other:?}")))
                    }
                },
            },
            "market_close" => EventBody::MarketClose,
            other => return Err(EventParseError(format!("unknown event kind {other:?}"))),
        };
        Ok(Event { seq, t, body })
    }
}

impl OrderDesc {
    fn encode(&self) -> String {
        let mut s = format!(
            " account={} asset={} side={} kind={} qty={}",
            self.account,
            self.asset,
            self.side.as_str(),
            if self.price.is_some() { "limit" } else { "market" },
            self.qty
        );
        if let Some(p) = self.price {
            s.push_str(&format!(" price={p}"));
        }
        s
    }

    fn parse(kv: &KvFields) -> Result<OrderDesc, EventParseError> {
        let side = Side::parse(kv.str("side")?)
            .ok_or_else(|| EventParseError("bad side".into()))?;
        let price = match kv.str("kind")? {
            "limit" => Some(kv.price("price")?),
            "market" => None,
            other => return Err(EventParseError(format!("bad order kind {other:?}"))),
        };
        Ok(OrderDesc {
            account: kv.int("account")?,
            asset: kv.int::<u32>("asset")?,
            side,
            qty: kv.int("qty")?,
            price,
        })
    }
}

/// Space-separated `key=value` field accessor.
struct KvFields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> KvFields<'a> {
    fn parse(line: &'a str) -> Result<KvFields<'a>, EventParseError> {
        let mut pairs = Vec::new();
        for tok in line.split_ascii_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| EventParseError(format!("token {tok:?} is not key=value")))?;
            pairs.push((k, v));
        }
        if pairs.is_empty() {
            return Err(EventParseError("empty event line".into()));
        }
        Ok(KvFields { pairs })
    }

    fn str(&self, key: &str) -> Result<&'a str, EventParseError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| EventParseError(format!("missing field {key}")))
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T, EventParseError> {
        self.str(key)?
            .parse()
            .map_err(|_| EventParseError(format!("bad integer in field {key}")))
    }

    fn float(&self, key: &str) -> Result<f64, EventParseError> {
        self.str(key)?
            .parse()
            .map_err(|_| EventParseError(format!("bad number in field {key}")))
    }

    fn cents(&self, key: &str) -> Result<Cents, EventParseError> {
        parse_cents(self.str(key)?)
            .ok_or_else(|| EventParseError(format!("bad cash amount in field {key}")))
    }

    fn price(&self, key: &str) -> Result<Price, EventParseError> {
        Price::parse(self.str(key)?)
            .ok_or_else(|| EventParseError(format!("bad price in field {key}")))
    }

    fn int_list(&self, key: &str) -> Result<Vec<i64>, EventParseError> {
        self.str(key)?
            .split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| EventParseError(format!("bad integer list in field {key}")))
            })
            .collect()
    }
}
