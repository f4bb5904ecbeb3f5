//! Liquidity takers: rebalance toward a random portfolio with market orders.
//!
//! On activation the agent draws a risk fraction `X ~ U(0,1)` and flat
//! Dirichlet weights, prices its risky wealth `W = X (c + Σ h·p_mid)`,
//! computes desired holdings `floor(w_k W / p_mid_k)` and submits a market
//! order for each signed difference from what it holds.

use super::{
    flat_dirichlet, last_recorded_mid, tolerate_rejection, ActivationGate, AgentError,
    FlowAgentState, TickAgent,
};
use crate::client::ClientSession;
use crate::exchange::OrderSpec;
use crate::types::{AccountId, AssetId, Cents, Side};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Explicit randomness consumed by one activation.
#[derive(Debug, Clone)]
pub struct LtDraws {
    /// Fraction of wealth the agent wants invested this activation.
    pub risk_fraction: f64,
    /// Flat Dirichlet allocation across assets.
    pub weights: Vec<f64>,
}

impl LtDraws {
    pub fn sample(rng: &mut impl Rng, assets: usize) -> LtDraws {
        LtDraws { risk_fraction: rng.gen(), weights: flat_dirichlet(rng, assets) }
    }
}

/// Market snapshot the decision runs against.
#[derive(Debug, Clone)]
pub struct LtView {
    /// Valuation mid per asset: live when the book is two-sided, else the
    /// most recent recorded mid. `None` only for never-priced assets, which
    /// are skipped outright.
    pub mids: Vec<Option<f64>>,
    pub cash: Cents,
    pub holdings: Vec<i64>,
}

/// Pure rebalancing decision; assets without a mid are skipped entirely.
pub fn lt_step(view: &LtView, draws: &LtDraws) -> Vec<OrderSpec> {
    let wealth_risky = {
        let mut w = view.cash as f64 / 100.0;
        for (k, m) in view.mids.iter().enumerate() {
            if let Some(mid) = m {
                w += view.holdings[k] as f64 * mid;
            }
        }
        w * draws.risk_fraction
    };
    let mut orders = Vec::new();
    for (k, m) in view.mids.iter().enumerate() {
        let Some(mid) = *m else { continue };
        let desired = (draws.weights[k] * wealth_risky / mid).floor() as i64;
        let delta = desired - view.holdings[k];
        if delta > 0 {
            orders.push(OrderSpec::market(k as AssetId, Side::Buy, delta as u64));
        } else if delta < 0 {
            orders.push(OrderSpec::market(k as AssetId, Side::Sell, (-delta) as u64));
        }
    }
    orders
}

pub struct LtAgent {
    session: ClientSession,
    rng: ChaCha12Rng,
    gate: ActivationGate,
    assets: u32,
}

impl LtAgent {
    pub fn new(session: ClientSession, rng: ChaCha12Rng, t_freq: f64, assets: u32) -> LtAgent {
        LtAgent { session, rng, gate: ActivationGate::new(t_freq), assets }
    }

    pub fn state(&self) -> FlowAgentState {
        FlowAgentState { account: self.session.account, rng: self.rng.clone() }
    }

    /// Rebuilds the agent from persisted state; behaviour continues exactly
    /// where [`LtAgent::state`] captured it.
    pub fn restore(state: FlowAgentState, session: ClientSession, t_freq: f64, assets: u32) -> LtAgent {
        assert_eq!(state.account, session.account);
        LtAgent { session, rng: state.rng, gate: ActivationGate::new(t_freq), assets }
    }
}

impl TickAgent for LtAgent {
    fn account(&self) -> AccountId {
        self.session.account
    }

    fn on_tick(&mut self, _t: u64) -> Result<(), AgentError> {
        let u: f64 = self.rng.gen();
        if !self.gate.fires(u) {
            return Ok(());
        }
        let me = self.session.account;
        let wrap = |source| AgentError { account: me, source };
        let acct = self.session.account().map_err(wrap)?;
        let mut mids = Vec::with_capacity(self.assets as usize);
        for k in 0..self.assets {
            let mid = match self.session.quote(k).map_err(wrap)?.mid {
                Some(m) => Some(m),
                None => last_recorded_mid(&mut self.session, k).map_err(wrap)?,
            };
            mids.push(mid);
        }
        let view = LtView { mids, cash: acct.cash, holdings: acct.holdings };
        let draws = LtDraws::sample(&mut self.rng, self.assets as usize);
        for spec in lt_step(&view, &draws) {
            tolerate_rejection(me, self.session.submit(spec))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_portfolio_emits_nothing() {
        let view = LtView { mids: vec![Some(100.0)], cash: 1_000_000, holdings: vec![100] };
        let draws = LtDraws { risk_fraction: 0.5, weights: vec![1.0] };
        // W = 0.5 * (10000 + 100*100) = 10000; desired = 100 = held.
        assert!(lt_step(&view, &draws).is_empty());
    }

    #[test]
    fn full_risk_doubles_position() {
        let view = LtView { mids: vec![Some(100.0)], cash: 1_000_000, holdings: vec![100] };
        let draws = LtDraws { risk_fraction: 1.0, weights: vec![1.0] };
        let orders = lt_step(&view, &draws);
        assert_eq!(orders, vec![OrderSpec::market(0, Side::Buy, 100)]);
    }

    #[test]
    fn negative_delta_sells() {
        let view = LtView { mids: vec![Some(100.0)], cash: 0, holdings: vec![100] };
        let draws = LtDraws { risk_fraction: 0.25, weights: vec![1.0] };
        // W = 2500 → desired 25 → sell 75.
        let orders = lt_step(&view, &draws);
        assert_eq!(orders, vec![OrderSpec::market(0, Side::Sell, 75)]);
    }

    #[test]
    fn missing_mid_skips_asset() {
        let view = LtView { mids: vec![None, Some(10.0)], cash: 100_000, holdings: vec![40, 0] };
        let draws = LtDraws { risk_fraction: 1.0, weights: vec![0.5, 0.5] };
        let orders = lt_step(&view, &draws);
        // Wealth counts only the priced asset: W = 1000, desired = floor(0.5*1000/10) = 50.
        assert_eq!(orders, vec![OrderSpec::market(1, Side::Buy, 50)]);
    }

    #[test]
    fn budget_feasibility_holds() {
        let view = LtView {
            mids: vec![Some(50.0), Some(200.0)],
            cash: 2_000_000,
            holdings: vec![10, 20],
        };
        let draws = LtDraws { risk_fraction: 0.83, weights: vec![0.3, 0.7] };
        let wealth = 0.83 * (20_000.0 + 10.0 * 50.0 + 20.0 * 200.0);
        let desired_notional: f64 = [(0.3f64, 50.0f64), (0.7, 200.0)]
            .iter()
            .map(|&(w, p)| (w * wealth / p).floor() * p)
            .sum();
        assert!(desired_notional <= wealth + 50.0 + 200.0);
        let _ = lt_step(&view, &draws);
    }
}
