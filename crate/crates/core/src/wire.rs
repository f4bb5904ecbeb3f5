//! Wire codec: logical requests/responses to and from HTTP/1.1 bytes.
//!
//! The protocol is a deliberately small HTTP subset so that a run can be
//! inspected with ordinary tools: one request per connection, fixed header
//! set, `connection: close`, and flat `key=value` bodies (one pair per
//! line). Encoding is canonical — the same logical message always produces
//! the same bytes — which is what makes loopback and socket transports
//! byte-identical and lets tests freeze golden messages.
//!
//! Endpoints:
//!
//! | request                     | body keys                              |
//! |-----------------------------|----------------------------------------|
//! | `POST /order`               | `asset side kind qty [price]`          |
//! | `POST /cancel`              | `asset order_id`                       |
//! | `GET /quote/{asset}`        | —                                      |
//! | `GET /depth/{asset}?levels=N` | —                                    |
//! | `GET /history/{asset}?since=T` | —                                   |
//! | `GET /volume/{asset}`       | —                                      |
//! | `GET /account/{id}`         | —                                      |
//! | `GET /clock`                | —                                      |
//!
//! Identity travels in the `x-account` header. Responses carry a `type=`
//! discriminator as their first body line.

use crate::book::DepthLevel;
use crate::exchange::{OrderSpec, Rejection};
use crate::ledger::AccountKind;
use crate::types::{format_cents, parse_cents, AccountId, AssetId, OrderId, Price, Qty, Side};
use thiserror::Error;

/// Malformed wire data; `offset` is the byte position of the problem.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("protocol error at byte {offset}: {what}")]
pub struct ProtocolError {
    pub offset: usize,
    pub what: String,
}

impl ProtocolError {
    pub fn new(offset: usize, what: impl Into<String>) -> ProtocolError {
        ProtocolError { offset, what: what.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    SubmitOrder { account: AccountId, spec: OrderSpec },
    CancelOrder { account: AccountId, asset: AssetId, order_id: OrderId },
    GetQuote { asset: AssetId },
    GetDepth { asset: AssetId, levels: usize },
    GetHistory { asset: AssetId, since: f64 },
    GetVolume { asset: AssetId },
    GetAccount { requester: Option<AccountId>, id: AccountId },
    GetClock,
}

/// Account state as carried on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountBody {
    pub id: AccountId,
    pub kind: AccountKind,
    pub cash: i64,
    pub reserved_cash: i64,
    pub holdings: Vec<i64>,
    pub reserved_shares: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Accepted { order_id: OrderId, filled: Qty, resting: Qty, unfilled: Qty },
    OrderRejected { reason: Rejection },
    Cancelled { qty: Qty },
    Quote { bid: Option<Price>, ask: Option<Price>, mid: Option<f64> },
    Depth { bids: Vec<DepthLevel>, asks: Vec<DepthLevel> },
    History { points: Vec<(f64, f64)> },
    Volume { v_total: u64 },
    Account(AccountBody),
    Clock { t: f64 },
    /// Query-level failure (unknown asset/account, not owner).
    Error { reason: Rejection },
    /// The peer could not parse our bytes.
    BadRequest { offset: usize, detail: String },
}

const VERSION: &str = "HTTP/1.1";

fn request_envelope(method: &str, target: &str, account: Option<AccountId>, body: &str) -> Vec<u8> {
    let mut s = format!("{method} {target} {VERSION}\r\nhost: sim\r\n");
    if let Some(a) = account {
        s.push_str(&format!("x-account: {a}\r\n"));
    }
    s.push_str(&format!("content-length: {}\r\nconnection: close\r\n\r\n", body.len()));
    s.push_str(body);
    s.into_bytes()
}

fn response_envelope(code: u16, body: &str) -> Vec<u8> {
    let phrase = match code {
        200 => "OK",
        400 => "Bad Request",
        403 => "Forbidden",
        404 => "Not Found",
        _ => "Internal Server Error",
    };
    format!(
        "{VERSION} {code} {phrase}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )
    .into_bytes()
}

/// Canonical bytes for a logical request.
pub fn encode_request(req: &Request) -> Vec<u8> {
    match req {
        Request::SubmitOrder { account, spec } => {
            let mut body = format!(
                "asset={}\nside={}\nkind={}\nqty={}\n",
                spec.asset,
                spec.side.as_str(),
                if spec.price.is_some() { "limit" } else { "market" },
                spec.qty
            );
            if let Some(p) = spec.price {
                body.push_str(&format!("price={p}\n"));
            }
            request_envelope("POST", "/order", Some(*account), &body)
        }
        Request::CancelOrder { account, asset, order_id } => {
            let body = format!("asset={asset}\norder_id={order_id}\n");
            request_envelope("POST", "/cancel", Some(*account), &body)
        }
        Request::GetQuote { asset } => {
            request_envelope("GET", &format!("/quote/{asset}"), None, "")
        }
        Request::GetDepth { asset, levels } => {
            request_envelope("GET", &format!("/depth/{asset}?levels={levels}"), None, "")
        }
        Request::GetHistory { asset, since } => {
            request_envelope("GET", &format!("/history/{asset}?since={since}"), None, "")
        }
        Request::GetVolume { asset } => {
            request_envelope("GET", &format!("/volume/{asset}"), None, "")
        }
        Request::GetAccount { requester, id } => {
            request_envelope("GET", &format!("/account/{id}"), *requester, "")
        }
        Request::GetClock => request_envelope("GET", "/clock", None, ""),
    }
}

/// Canonical bytes for a logical response.
pub fn encode_response(resp: &Response) -> Vec<u8> {
    match resp {
        Response::Accepted { order_id, filled, resting, unfilled } => response_envelope(
            200,
            &format!(
                "type=order_ack\nstatus=accepted\norder_id={order_id}\nfilled={filled}\n\
                 resting={resting}\nunfilled={unfilled}\n"
            ),
        ),
        Response::OrderRejected { reason } => response_envelope(
            200,
            &format!("type=order_ack\nstatus=rejected\nreason={}\n", reason.as_str()),
        ),
        Response::Cancelled { qty } => {
            response_envelope(200, &format!("type=cancel_ack\ncancelled={qty}\n"))
        }
        Response::Quote { bid, ask, mid } => {
            let mut body = String::from("type=quote\n");
            if let Some(b) = bid {
                body.push_str(&format!("bid={b}\n"));
            }
            if let Some(a) = ask {
                body.push_str(&format!("ask={a}\n"));
            }
            if let Some(m) = mid {
                body.push_str(&format!("mid={m:.3}\n"));
            }
            response_envelope(200, &body)
        }
        Response::Depth { bids, asks } => {
            let mut body = String::from("type=depth\n");
            for l in bids {
                body.push_str(&format!("bid={},{},{}\n", l.price, l.qty, l.orders));
            }
            for l in asks {
                body.push_str(&format!("ask={},{},{}\n", l.price, l.qty, l.orders));
            }
            response_envelope(200, &body)
        }
        Response::History { points } => {
            let mut body = String::from("type=history\n");
            for (t, mid) in points {
                body.push_str(&format!("p={t},{mid:.3}\n"));
            }
            response_envelope(200, &body)
        }
        Response::Volume { v_total } => {
            response_envelope(200, &format!("type=volume\nv_total={v_total}\n"))
        }
        Response::Account(a) => {
            let holdings = join_i64(&a.holdings);
            let reserved = join_i64(&a.reserved_shares);
            response_envelope(
                200,
                &format!(
                    "type=account\naccount={}\nkind={}\ncash={}\nreserved_cash={}\n\
                     holdings={holdings}\nreserved_shares={reserved}\n",
                    a.id,
                    a.kind.as_str(),
                    format_cents(a.cash),
                    format_cents(a.reserved_cash)
                ),
            )
        }
        Response::Clock { t } => response_envelope(200, &format!("type=clock\nt={t}\n")),
        Response::Error { reason } => {
            let code = match reason {
                Rejection::NotOwner => 403,
                Rejection::UnknownAsset | Rejection::UnknownAccount => 404,
                _ => 400,
            };
            response_envelope(code, &format!("type=error\nreason={}\n", reason.as_str()))
        }
        Response::BadRequest { offset, detail } => response_envelope(
            400,
            &format!(
                "type=error\nreason=bad_request\noffset={offset}\ndetail={}\n",
                detail.replace(['\n', '\r'], " ")
            ),
        ),
    }
}

fn join_i64(xs: &[i64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses request bytes produced by [`encode_request`] (or any conforming peer).
pub fn decode_request(bytes: &[u8]) -> Result<Request, ProtocolError> {
    let msg = parse_http(bytes, true)?;
    let account = msg.account;
    let (path, query) = match msg.target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (msg.target.as_str(), None),
    };
    let require_account = |what: &str| {
        account.ok_or_else(|| {
            ProtocolError::new(msg.headers_offset, format!("{what} requires x-account header"))
        })
    };
    match (msg.method.as_str(), path) {
        ("POST", "/order") => {
            let kv = KvBody::parse(&msg.body, msg.body_offset)?;
            let side = Side::parse(kv.require("side")?)
                .ok_or_else(|| kv.err("side", "must be buy or sell"))?;
            let qty: Qty = kv.require("qty")?.parse().map_err(|_| kv.err("qty", "bad integer"))?;
            let asset: AssetId =
                kv.require("asset")?.parse().map_err(|_| kv.err("asset", "bad integer"))?;
            let price = match kv.require("kind")? {
                "limit" => Some(
                    Price::parse(kv.require("price")?)
                        .ok_or_else(|| kv.err("price", "must be a positive decimal"))?,
                ),
                "market" => None,
                _ => return Err(kv.err("kind", "must be limit or market")),
            };
            Ok(Request::SubmitOrder {
                account: require_account("POST /order")?,
                spec: OrderSpec { asset, side, qty, price },
            })
        }
        ("POST", "/cancel") => {
            let kv = KvBody::parse(&msg.body, msg.body_offset)?;
            Ok(Request::CancelOrder {
                account: require_account("POST /cancel")?,
                asset: kv.require("asset")?.parse().map_err(|_| kv.err("asset", "bad integer"))?,
                order_id: kv
                    .require("order_id")?
                    .parse()
                    .map_err(|_| kv.err("order_id", "bad integer"))?,
            })
        }
        ("GET", "/clock") => Ok(Request::GetClock),
        ("GET", _) => {
            let mut parts = path.splitn(3, '/').skip(1);
            let kind = parts.next().unwrap_or("");
            let arg = parts.next();
            let parse_id = |what: &str| -> Result<u64, ProtocolError> {
                arg.and_then(|s| s.parse().ok()).ok_or_else(|| {
                    ProtocolError::new(msg.target_offset, format!("bad {what} in path"))
                })
            };
            match kind {
                "quote" => Ok(Request::GetQuote { asset: parse_id("asset")? as AssetId }),
                "volume" => Ok(Request::GetVolume { asset: parse_id("asset")? as AssetId }),
                "account" => Ok(Request::GetAccount { requester: account, id: parse_id("account")? }),
                "depth" => {
                    let levels = match query_param(query, "levels") {
                        Some(v) => v.parse().map_err(|_| {
                            ProtocolError::new(msg.target_offset, "bad levels parameter")
                        })?,
                        None => 10,
                    };
                    Ok(Request::GetDepth { asset: parse_id("asset")? as AssetId, levels })
                }
                "history" => {
                    let since = match query_param(query, "since") {
                        Some(v) => v.parse().map_err(|_| {
                            ProtocolError::new(msg.target_offset, "bad since parameter")
                        })?,
                        None => 0.0,
                    };
                    Ok(Request::GetHistory { asset: parse_id("asset")? as AssetId, since })
                }
                _ => Err(ProtocolError::new(msg.target_offset, "unknown endpoint")),
            }
        }
        _ => Err(ProtocolError::new(0, "unsupported method")),
    }
}

/// Parses response bytes produced by [`encode_response`].
pub fn decode_response(bytes: &[u8]) -> Result<Response, ProtocolError> {
    let msg = parse_http(bytes, false)?;
    let kv = KvBody::parse(&msg.body, msg.body_offset)?;
    match kv.require("type")? {
        "order_ack" => match kv.require("status")? {
            "accepted" => Ok(Response::Accepted {
                order_id: kv.int("order_id")?,
                filled: kv.int("filled")?,
                resting: kv.int("resting")?,
                unfilled: kv.int("unfilled")?,
            }),
            "rejected" => Ok(Response::OrderRejected { reason: kv.reason()? }),
            _ => Err(kv.err("status", "must be accepted or rejected")),
        },
        "cancel_ack" => Ok(Response::Cancelled { qty: kv.int("cancelled")? }),
        "quote" => {
            let parse_px = |key: &str| -> Result<Option<Price>, ProtocolError> {
                kv.get(key)
                    .map(|v| Price::parse(v).ok_or_else(|| kv.err(key, "bad price")))
                    .transpose()
            };
            let mid = kv
                .get("mid")
                .map(|v| v.parse::<f64>().map_err(|_| kv.err("mid", "bad number")))
                .transpose()?;
            Ok(Response::Quote { bid: parse_px("bid")?, ask: parse_px("ask")?, mid })
        }
        "depth" => {
            let parse_level = |v: &str| -> Option<DepthLevel> {
                let mut it = v.split(',');
                Some(DepthLevel {
                    price: Price::parse(it.next()?)?,
                    qty: it.next()?.parse().ok()?,
                    orders: it.next()?.parse().ok()?,
                })
            };
            let mut bids = Vec::new();
            let mut asks = Vec::new();
            for (k, v) in &kv.pairs {
                match k.as_str() {
                    "bid" => bids.push(
                        parse_level(v).ok_or_else(|| kv.err("bid", "bad depth level"))?,
                    ),
                    "ask" => asks.push(
                        parse_level(v).ok_or_else(|| kv.err("ask", "bad depth level"))?,
                    ),
                    _ => {}
                }
            }
            Ok(Response::Depth { bids, asks })
        }
        "history" => {
            let mut points = Vec::new();
            for (k, v) in &kv.pairs {
                if k == "p" {
                    let (t, m) = v
                        .split_once(',')
                        .ok_or_else(|| kv.err("p", "bad history point"))?;
                    let t: f64 = t.parse().map_err(|_| kv.err("p", "bad time"))?;
                    let m: f64 = m.parse().map_err(|_| kv.err("p", "bad mid"))?;
                    points.push((t, m));
                }
            }
            Ok(Response::History { points })
        }
        "volume" => Ok(Response::Volume { v_total: kv.int("v_total")? }),
        "account" => Ok(Response::Account(AccountBody {
            id: kv.int("account")?,
            kind: AccountKind::parse(kv.require("kind")?)
                .ok_or_else(|| kv.err("kind", "bad account kind"))?,
            cash: kv.cents("cash")?,
            reserved_cash: kv.cents("reserved_cash")?,
            holdings: kv.int_list("holdings")?,
            reserved_shares: kv.int_list("reserved_shares")?,
        })),
        "clock" => Ok(Response::Clock {
            t: kv.require("t")?.parse().map_err(|_| kv.err("t", "bad number"))?,
        }),
        "error" => {
            let reason = kv.require("reason")?;
            if reason == "bad_request" {
                Ok(Response::BadRequest {
                    offset: kv.get("offset").and_then(|v| v.parse().ok()).unwrap_or(0),
                    detail: kv.get("detail").unwrap_or("").to_string(),
                })
            } else {
                Ok(Response::Error { reason: kv.reason()? })
            }
        }
        other => Err(ProtocolError::new(msg.body_offset, format!("unknown type {other:?}"))),
    }
}

fn query_param<'a>(query: Option<&'a str>, name: &str) -> Option<&'a str> {
    query?
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == name)
        .map(|(_, v)| v)
}

struct HttpMessage {
    method: String,
    target: String,
    target_offset: usize,
    account: Option<AccountId>,
    headers_offset: usize,
    body: String,
    body_offset: usize,
}

/// Strict single-message HTTP parser. `is_request` switches between request
/// and status lines; trailing bytes beyond `content-length` are an error.
fn parse_http(bytes: &[u8], is_request: bool) -> Result<HttpMessage, ProtocolError> {
    let mut pos = 0usize;
    let line = read_crlf_line(bytes, &mut pos)?;
    let start_offset = 0usize;
    let (method, target, target_offset) = if is_request {
        let mut parts = line.splitn(3, ' ');
        let method = parts.next().unwrap_or("").to_string();
        let target = parts
            .next()
            .ok_or_else(|| ProtocolError::new(start_offset, "missing request target"))?
            .to_string();
        let version = parts
            .next()
            .ok_or_else(|| ProtocolError::new(start_offset, "missing http version"))?;
        if version != VERSION {
            return Err(ProtocolError::new(
                start_offset + method.len() + 1 + target.len() + 1,
                "unsupported http version",
            ));
        }
        let target_offset = method.len() + 1;
        (method, target, target_offset)
    } else {
        let mut parts = line.splitn(3, ' ');
        let version = parts.next().unwrap_or("");
        if version != VERSION {
            return Err(ProtocolError::new(start_offset, "unsupported http version"));
        }
        let code = parts
            .next()
            .ok_or_else(|| ProtocolError::new(start_offset, "missing status code"))?;
        code.parse::<u16>()
            .map_err(|_| ProtocolError::new(start_offset + VERSION.len() + 1, "bad status code"))?;
        (String::new(), code.to_string(), VERSION.len() + 1)
    };

    let headers_offset = pos;
    let mut account = None;
    let mut content_length: Option<usize> = None;
    loop {
        let line_offset = pos;
        let line = read_crlf_line(bytes, &mut pos)?;
        if line.is_empty() {
            break;
        }
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| ProtocolError::new(line_offset, "malformed header line"))?;
        let name = name.trim().to_ascii_lowercase();
        let value = value.trim();
        match name.as_str() {
            "content-length" => {
                content_length = Some(value.parse().map_err(|_| {
                    ProtocolError::new(line_offset, "bad content-length value")
                })?);
            }
            "x-account" => {
                account = Some(value.parse().map_err(|_| {
                    ProtocolError::new(line_offset, "bad x-account value")
                })?);
            }
            _ => {} // host, connection and unknown headers carry no state
        }
    }
    let body_offset = pos;
    let len = content_length
        .ok_or_else(|| ProtocolError::new(body_offset, "missing content-length header"))?;
    if bytes.len() < body_offset + len {
        return Err(ProtocolError::new(bytes.len(), "truncated body"));
    }
    if bytes.len() > body_offset + len {
        return Err(ProtocolError::new(body_offset + len, "trailing bytes after body"));
    }
    let body = std::str::from_utf8(&bytes[body_offset..])
        .map_err(|e| ProtocolError::new(body_offset + e.valid_up_to(), "body is not utf-8"))?
        .to_string();
    Ok(HttpMessage { method, target, target_offset, account, headers_offset, body, body_offset })
}

fn read_crlf_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, ProtocolError> {
    let rest = &bytes[*pos..];
    let end = rest
        .windows(2)
        .position(|w| w == b"\r\n")
        .ok_or_else(|| ProtocolError::new(bytes.len(), "missing crlf"))?;
    let line = std::str::from_utf8(&rest[..end])
        .map_err(|e| ProtocolError::new(*pos + e.valid_up_to(), "line is not utf-8"))?;
    *pos += end + 2;
    Ok(line)
}

/// Newline-separated `key=value` body. Duplicate keys are preserved in order.
struct KvBody {
    pairs: Vec<(String, String)>,
    offset: usize,
}

impl KvBody {
    fn parse(body: &str, offset: usize) -> Result<KvBody, ProtocolError> {
        let mut pairs = Vec::new();
        let mut line_offset = offset;
        for line in body.split('\n') {
            if !line.is_empty() {
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    ProtocolError::new(line_offset, "body line is not key=value")
                })?;
                pairs.push((k.to_string(), v.to_string()));
            }
            line_offset += line.len() + 1;
        }
        Ok(KvBody { pairs, offset })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ProtocolError> {
        self.get(key)
            .ok_or_else(|| ProtocolError::new(self.offset, format!("missing field {key}")))
    }

    fn err(&self, key: &str, what: &str) -> ProtocolError {
        ProtocolError::new(self.offset, format!("field {key}: {what}"))
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<T, ProtocolError> {
        self.require(key)?.parse().map_err(|_| self.err(key, "bad integer"))
    }

    fn cents(&self, key: &str) -> Result<i64, ProtocolError> {
        parse_cents(self.require(key)?).ok_or_else(|| self.err(key, "bad amount"))
    }

    fn int_list(&self, key: &str) -> Result<Vec<i64>, ProtocolError> {
        self.require(key)?
            .split(',')
            .map(|s| s.parse().map_err(|_| self.err(key, "bad integer list")))
            .collect()
    }

    fn reason(&self) -> Result<Rejection, ProtocolError> {
        let r = self.require("reason")?;
        Rejection::parse(r).ok_or_else(|| self.err("reason", "unknown rejection reason"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submit_request_bytes_are_canonical() {
        let req = Request::SubmitOrder {
            account: 12,
            spec: OrderSpec::limit(0, Side::Buy, Price::parse("102.00").unwrap(), 120),
        };
        let bytes = encode_request(&req);
        let expect = b"POST /order HTTP/1.1\r\nhost: sim\r\nx-account: 12\r\n\
                       content-length: 49\r\nconnection: close\r\n\r\n\
                       asset=0\nside=buy\nkind=limit\nqty=120\nprice=102.00\n";
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            std::str::from_utf8(expect).unwrap()
        );
        assert_eq!(decode_request(&bytes).unwrap(), req);
    }

    #[test]
    fn get_requests_round_trip() {
        let reqs = [
            Request::GetQuote { asset: 1 },
            Request::GetDepth { asset: 0, levels: 5 },
            Request::GetHistory { asset: 2, since: 35.5 },
            Request::GetVolume { asset: 0 },
            Request::GetAccount { requester: Some(7), id: 7 },
            Request::GetClock,
            Request::CancelOrder { account: 3, asset: 0, order_id: 5 },
            Request::SubmitOrder { account: 9, spec: OrderSpec::market(1, Side::Sell, 40) },
        ];
        for req in reqs {
            let bytes = encode_request(&req);
            assert_eq!(decode_request(&bytes).unwrap(), req, "{req:?}");
        }
    }

    #[test]
    fn responses_round_trip() {
        let resps = [
            Response::Accepted { order_id: 17, filled: 20, resting: 100, unfilled: 0 },
            Response::OrderRejected { reason: Rejection::InsufficientFunds },
            Response::Cancelled { qty: 30 },
            Response::Quote {
                bid: Price::parse("99.50"),
                ask: Price::parse("100.50"),
                mid: Some(100.0),
            },
            Response::Quote { bid: None, ask: None, mid: None },
            Response::Depth {
                bids: vec![DepthLevel { price: Price::parse("99.50").unwrap(), qty: 100, orders: 2 }],
                asks: vec![],
            },
            Response::History { points: vec![(0.0, 100.0), (5.0, 100.01)] },
            Response::Volume { v_total: 50 },
            Response::Account(AccountBody {
                id: 7,
                kind: AccountKind::Standard,
                cash: 1234567,
                reserved_cash: 0,
                holdings: vec![50, 150],
                reserved_shares: vec![0, 10],
            }),
            Response::Clock { t: 42.0 },
            Response::Error { reason: Rejection::UnknownAsset },
            Response::BadRequest { offset: 17, detail: "missing crlf".into() },
        ];
        for resp in resps {
            let bytes = encode_response(&resp);
            match (decode_response(&bytes).unwrap(), &resp) {
                (Response::History { points: got }, Response::History { points: want }) => {
                    assert_eq!(got.len(), want.len());
                    for ((t1, m1), (t2, m2)) in got.iter().zip(want) {
                        assert_eq!(t1, t2);
                        assert!((m1 - m2).abs() < 1e-9);
                    }
                }
                (got, want) => assert_eq!(&got, want, "bytes: {:?}", String::from_utf8_lossy(&bytes)),
            }
        }
    }

    #[test]
    fn truncated_message_reports_offset() {
        let bytes = encode_request(&Request::GetClock);
        let cut = &bytes[..bytes.len() - 2];
        let err = decode_request(cut).unwrap_err();
        assert!(err.offset <= cut.len());
        let garbage = b"FLY /moon HTTP/0.9\r\n\r\n";
        assert!(decode_request(garbage).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_request(&Request::GetClock);
        bytes.extend_from_slice(b"junk");
        let err = decode_request(&bytes).unwrap_err();
        assert!(err.what.contains("trailing"));
    }

    #[test]
    fn missing_account_header_on_order() {
        let bytes = request_envelope("POST", "/order", None, "asset=0\nside=buy\nkind=market\nqty=1\n");
        let err = decode_request(&bytes).unwrap_err();
        assert!(err.what.contains("x-account"));
    }

    #[test]
    fn depth_levels_default_when_absent() {
        let bytes = request_envelope("GET", "/depth/3", None, "");
        assert_eq!(decode_request(&bytes).unwrap(), Request::GetDepth { asset: 3, levels: 10 });
    }

    #[test]
    fn non_positive_price_is_malformed() {
        let body = "asset=0\nside=buy\nkind=limit\nqty=5\nprice=0.00\n";
        let bytes = request_envelope("POST", "/order", Some(1), body);
        let err = decode_request(&bytes).unwrap_err();
        assert!(err.what.contains("price"));
    }
}
