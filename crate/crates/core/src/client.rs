//! Client session: typed exchange operations over a pluggable transport.
//!
//! The loopback transport hands encoded bytes straight to the service
//! router; the socket transport opens one TCP connection per request. Both
//! carry identical bytes, so an agent behaves the same either way.
//!
//! Queries and cancels are idempotent and retried on transport failure.
//! Order submissions are never retried: a lost response leaves the outcome
//! unknown, and resubmitting could double-execute.

use crate::book::DepthLevel;
use crate::exchange::{Exchange, OrderAck, OrderSpec, QuoteView, Rejection};
use crate::service::handle_bytes;
use crate::types::{AccountId, AssetId, OrderId, Price, Qty, Side};
use crate::wire::{
    decode_response, encode_request, AccountBody, ProtocolError, Request, Response,
};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] TransportError),
    #[error("rejected: {}", .0.as_str())]
    Rejected(Rejection),
    #[error("{0}")]
    Protocol(#[from] ProtocolError),
}

/// Carries one encoded request to the exchange and returns the response bytes.
pub trait Transport: Send {
    fn round_trip(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError>;
}

/// In-process transport: encodes/decodes through the same codec as TCP.
pub struct LoopbackTransport {
    exchange: Arc<Exchange>,
}

impl LoopbackTransport {
    pub fn new(exchange: Arc<Exchange>) -> LoopbackTransport {
        LoopbackTransport { exchange }
    }
}

impl Transport for LoopbackTransport {
    fn round_trip(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(handle_bytes(&self.exchange, request))
    }
}

/// One TCP connection per request, `connection: close` semantics.
pub struct SocketTransport {
    addr: SocketAddr,
    timeout: Duration,
}

impl SocketTransport {
    pub fn new(addr: SocketAddr, timeout: Duration) -> SocketTransport {
        SocketTransport { addr, timeout }
    }
}

impl Transport for SocketTransport {
    fn round_trip(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        let io = |e: std::io::Error| TransportError(e.to_string());
        let mut stream = TcpStream::connect_timeout(&self.addr, self.timeout).map_err(io)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(io)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(io)?;
        stream.set_nodelay(true).map_err(io)?;
        stream.write_all(request).map_err(io)?;
        stream.flush().map_err(io)?;
        stream.shutdown(std::net::Shutdown::Write).map_err(io)?;
        let mut response = Vec::with_capacity(512);
        stream.read_to_end(&mut response).map_err(io)?;
        if response.is_empty() {
            return Err(TransportError("connection closed without a response".into()));
        }
        Ok(response)
    }
}

/// Typed operations for one account over one transport.
pub struct ClientSession {
    transport: Box<dyn Transport>,
    pub account: AccountId,
    retries: u32,
}

impl ClientSession {
    pub fn new(transport: Box<dyn Transport>, account: AccountId) -> ClientSession {
        ClientSession { transport, account, retries: 2 }
    }

    pub fn loopback(exchange: Arc<Exchange>, account: AccountId) -> ClientSession {
        ClientSession::new(Box::new(LoopbackTransport::new(exchange)), account)
    }

    pub fn connect(addr: SocketAddr, account: AccountId, timeout: Duration) -> ClientSession {
        ClientSession::new(Box::new(SocketTransport::new(addr, timeout)), account)
    }

    /// Transport retry budget for idempotent calls (cancels and queries).
    pub fn with_retries(mut self, retries: u32) -> ClientSession {
        self.retries = retries;
        self
    }

    pub fn submit_limit(
        &mut self,
        asset: AssetId,
        side: Side,
        price: Price,
        qty: Qty,
    ) -> Result<OrderAck, ClientError> {
        self.submit(OrderSpec::limit(asset, side, price, qty))
    }

    pub fn submit_market(
        &mut self,
        asset: AssetId,
        side: Side,
        qty: Qty,
    ) -> Result<OrderAck, ClientError> {
        self.submit(OrderSpec::market(asset, side, qty))
    }

    pub fn submit(&mut self, spec: OrderSpec) -> Result<OrderAck, ClientError> {
        let req = Request::SubmitOrder { account: self.account, spec };
        match self.call(&req, false)? {
            Response::Accepted { order_id, filled, resting, unfilled } => {
                Ok(OrderAck { order_id, filled, resting, unfilled })
            }
            Response::OrderRejected { reason } => Err(ClientError::Rejected(reason)),
            other => Err(unexpected("order_ack", &other)),
        }
    }

    pub fn cancel(&mut self, asset: AssetId, order_id: OrderId) -> Result<Qty, ClientError> {
        let req = Request::CancelOrder { account: self.account, asset, order_id };
        match self.call(&req, true)? {
            Response::Cancelled { qty } => Ok(qty),
            other => Err(unexpected("cancel_ack", &other)),
        }
    }

    pub fn quote(&mut self, asset: AssetId) -> Result<QuoteView, ClientError> {
        match self.call(&Request::GetQuote { asset }, true)? {
            Response::Quote { bid, ask, mid } => Ok(QuoteView { bid, ask, mid }),
            other => Err(unexpected("quote", &other)),
        }
    }

    pub fn depth(
        &mut self,
        asset: AssetId,
        levels: usize,
    ) -> Result<(Vec<DepthLevel>, Vec<DepthLevel>), ClientError> {
        match self.call(&Request::GetDepth { asset, levels }, true)? {
            Response::Depth { bids, asks } => Ok((bids, asks)),
            other => Err(unexpected("depth", &other)),
        }
    }

    pub fn history(&mut self, asset: AssetId, since: f64) -> Result<Vec<(f64, f64)>, ClientError> {
        match self.call(&Request::GetHistory { asset, since }, true)? {
            Response::History { points } => Ok(points),
            other => Err(unexpected("history", &other)),
        }
    }

    pub fn volume(&mut self, asset: AssetId) -> Result<u64, ClientError> {
        match self.call(&Request::GetVolume { asset }, true)? {
            Response::Volume { v_total } => Ok(v_total),
            other => Err(unexpected("volume", &other)),
        }
    }

    pub fn account(&mut self) -> Result<AccountBody, ClientError> {
        let req = Request::GetAccount { requester: Some(self.account), id: self.account };
        match self.call(&req, true)? {
            Response::Account(a) => Ok(a),
            other => Err(unexpected("account", &other)),
        }
    }

    pub fn clock(&mut self) -> Result<f64, ClientError> {
        match self.call(&Request::GetClock, true)? {
            Response::Clock { t } => Ok(t),
            other => Err(unexpected("clock", &other)),
        }
    }

    fn call(&mut self, req: &Request, idempotent: bool) -> Result<Response, ClientError> {
        let bytes = encode_request(req);
        let mut attempt = 0;
        let raw = loop {
            match self.transport.round_trip(&bytes) {
                Ok(raw) => break raw,
                Err(e) if idempotent && attempt < self.retries => {
                    attempt += 1;
                    let _ = e;
                }
                Err(e) => return Err(e.into()),
            }
        };
        match decode_response(&raw)? {
            Response::Error { reason } => Err(ClientError::Rejected(reason)),
            Response::BadRequest { offset, detail } => Err(ClientError::Protocol(
                ProtocolError::new(offset, format!("peer rejected request: {detail}")),
            )),
            resp => Ok(resp),
        }
    }
}

fn unexpected(wanted: &str, got: &Response) -> ClientError {
    ClientError::Protocol(ProtocolError::new(0, format!("expected {wanted}, got {got:?}")))
}
