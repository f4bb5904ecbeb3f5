//! Agent-based market simulator built around a continuous double auction.
//!
//! The crate is organised in layers: [`book`] implements price-time matching
//! for a single asset, [`exchange`] adds accounts, settlement and an
//! append-only event ledger, [`wire`]/[`service`]/[`client`] expose the
//! exchange over an HTTP/1.1 subset (loopback or TCP), and [`agents`],
//! [`estimators`] and [`ia`] implement the trading populations. [`stats`]
//! contains the stylized-facts validation suite and [`scenario`] ties
//! everything together into reproducible runs.

pub mod agents;
pub mod book;
pub mod client;
pub mod clock;
pub mod estimators;
pub mod events;
pub mod exchange;
pub mod ia;
pub mod ledger;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod server;
pub mod stats;
pub mod service;
pub mod svg;
pub mod types;
pub mod wire;
