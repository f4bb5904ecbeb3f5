//! Zero-intelligence trading populations.
//!
//! Each agent is a step function driven once per tick: an activation gate
//! decides whether it acts, pure decision functions turn market views plus
//! explicit random draws into order intents, and a thin wrapper performs
//! the protocol round-trips. Keeping the decision functions pure makes the
//! algorithms directly testable against hand-computed examples.

pub mod lp;
pub mod lt;
pub mod mm;

pub use lp::LpAgent;
pub use lt::LtAgent;
pub use mm::MmAgent;

use crate::client::ClientError;
use crate::types::AccountId;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Infrastructure failure while an agent was acting. Business rejections
/// are normal trading outcomes and never surface here.
#[derive(Debug, Error)]
#[error("account {account}: {source}")]
pub struct AgentError {
    pub account: AccountId,
    pub source: ClientError,
}

/// Poisson-like activation: fire iff `u < 1/t_freq` for a fresh uniform
/// draw each tick, giving a mean inter-activation gap of `t_freq` ticks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActivationGate {
    pub t_freq: f64,
}

impl ActivationGate {
    pub fn new(t_freq: f64) -> ActivationGate {
        assert!(t_freq >= 1.0, "activation period must be at least one tick");
        ActivationGate { t_freq }
    }

    pub fn fires(&self, u: f64) -> bool {
        u < 1.0 / self.t_freq
    }
}

/// One agent participating in the tick loop.
pub trait TickAgent {
    fn account(&self) -> AccountId;
    fn on_tick(&mut self, t: u64) -> Result<(), AgentError>;
}

/// Serializable between-activation state of a flow agent: everything they
/// remember is their identity and generator position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowAgentState {
    pub account: AccountId,
    pub rng: ChaCha12Rng,
}

/// Weights on the unit simplex via normalized Exp(1) spacings; a flat
/// Dirichlet over `k` categories. For `k = 1` the weight is exactly 1.
pub fn flat_dirichlet(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample(rand_distr::Exp1)).collect();
    normalize_weights(draws)
}

/// Normalizes non-negative draws to sum to 1, falling back to uniform
/// weights if they all vanish.
pub fn normalize_weights(mut draws: Vec<f64>) -> Vec<f64> {
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        let k = draws.len().max(1);
        return vec![1.0 / k as f64; draws.len()];
    }
    for d in &mut draws {
        *d /= sum;
    }
    draws
}

/// Treats business rejections as no-ops and propagates real failures.
pub(crate) fn tolerate_rejection<T>(
    account: AccountId,
    result: Result<T, ClientError>,
) -> Result<Option<T>, AgentError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(ClientError::Rejected(_)) => Ok(None),
        Err(source) => Err(AgentError { account, source }),
    }
}

/// Most recent recorded mid for `asset`, however old. Backs agent pricing
/// when the live book has lost a side and the quote carries no mid.
pub(crate) fn last_recorded_mid(
    session: &mut crate::client::ClientSession,
    asset: crate::types::AssetId,
) -> Result<Option<f64>, ClientError> {
    Ok(session.history(asset, 0.0)?.last().map(|&(_, m)| m))
}
