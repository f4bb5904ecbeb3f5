//! Request router: logical requests in, logical responses out.
//!
//! Both transports end up here — the loopback client calls [`handle_bytes`]
//! directly and the TCP server calls it per connection — so the two paths
//! produce byte-identical traffic by construction.

use crate::exchange::Exchange;
use crate::wire::{
    decode_request, encode_response, AccountBody, Request, Response,
};

pub fn handle_request(exchange: &Exchange, req: &Request) -> Response {
    match req {
        Request::SubmitOrder { account, spec } => match exchange.submit_order(*account, *spec) {
            Ok(ack) => Response::Accepted {
                order_id: ack.order_id,
                filled: ack.filled,
                resting: ack.resting,
                unfilled: ack.unfilled,
            },
            Err(reason) => Response::OrderRejected { reason },
        },
        Request::CancelOrder { account, asset, order_id } => {
            match exchange.cancel_order(*account, *asset, *order_id) {
                Ok(qty) => Response::Cancelled { qty },
                Err(reason) => Response::Error { reason },
            }
        }
        Request::GetQuote { asset } => match exchange.quote(*asset) {
            Ok(q) => Response::Quote { bid: q.bid, ask: q.ask, mid: q.mid },
            Err(reason) => Response::Error { reason },
        },
        Request::GetDepth { asset, levels } => match exchange.depth(*asset, *levels) {
            Ok((bids, asks)) => Response::Depth { bids, asks },
            Err(reason) => Response::Error { reason },
        },
        Request::GetHistory { asset, since } => match exchange.history(*asset, *since) {
            Ok(points) => Response::History { points },
            Err(reason) => Response::Error { reason },
        },
        Request::GetVolume { asset } => match exchange.volume(*asset) {
            Ok(v_total) => Response::Volume { v_total },
            Err(reason) => Response::Error { reason },
        },
        Request::GetAccount { requester, id } => match exchange.account_view(*requester, *id) {
            Ok(a) => Response::Account(AccountBody {
                id: a.id,
                kind: a.kind,
                cash: a.cash,
                reserved_cash: a.reserved_cash,
                holdings: a.holdings,
                reserved_shares: a.reserved_shares,
            }),
            Err(reason) => Response::Error { reason },
        },
        Request::GetClock => Response::Clock { t: exchange.now() },
    }
}

/// Decodes, routes and encodes one message. Undecodable requests come back
/// as a 400 with the parser's byte offset.
pub fn handle_bytes(exchange: &Exchange, bytes: &[u8]) -> Vec<u8> {
    let response = match decode_request(bytes) {
        Ok(req) => handle_request(exchange, &req),
        Err(e) => Response::BadRequest { offset: e.offset, detail: e.what },
    };
    encode_response(&response)
}
