//! Liquidity providers: post limit orders around a noisy reservation price.
//!
//! On activation the agent estimates per-asset volatility from recent mid
//! history, perturbs each mid by `X ~ N(0, σ²)` to get a limit price
//! `p_L = p_mid (1 + X)`, then either offers inventory above the market or
//! splits cash across cheap-looking assets with resting bids.
//!
//! The pricing reference is the live mid while the book is two-sided and
//! the last recorded mid otherwise. Trend followers can strip one side of
//! the book bare; since every other agent needs a live mid to act, a
//! one-sided book would freeze the market for good if providers did not
//! keep quoting through the gap and reseed the missing side.

use super::{
    last_recorded_mid, normalize_weights, tolerate_rejection, ActivationGate, AgentError,
    FlowAgentState, TickAgent,
};
use crate::client::ClientSession;
use crate::estimators::realized_volatility;
use crate::exchange::{OrderSpec, QuoteView};
use crate::stats::per_tick_sample;
use crate::types::{AccountId, AssetId, Cents, Price, Side};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Default seconds of mid history feeding the volatility estimate (one
/// per-tick point per second).
pub const DEFAULT_WINDOW: u32 = 100;

/// Default volatility used while an asset has fewer than two history points
/// or a degenerate (zero) estimate, e.g. a mid pinned flat through the window.
pub const DEFAULT_SIGMA_FALLBACK: f64 = 0.005;

/// Explicit randomness consumed by one activation. All vectors are drawn
/// per asset up front so the stream layout is independent of branch flow.
#[derive(Debug, Clone)]
pub struct LpDraws {
    /// Relative limit-price shifts, already scaled by each asset's σ.
    pub shifts: Vec<f64>,
    /// Fraction of holdings offered when the sell branch fires.
    pub sell_fractions: Vec<f64>,
    /// Exp(1) draws; normalized over the buy-eligible subset they form a
    /// flat Dirichlet cash split.
    pub cash_spacings: Vec<f64>,
}

impl LpDraws {
    pub fn sample(rng: &mut impl Rng, sigmas: &[f64]) -> LpDraws {
        let shifts = sigmas
            .iter()
            .map(|&s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let sell_fractions = (0..sigmas.len()).map(|_| rng.gen()).collect();
        let cash_spacings = (0..sigmas.len()).map(|_| rng.sample(rand_distr::Exp1)).collect();
        LpDraws { shifts, sell_fractions, cash_spacings }
    }
}

#[derive(Debug, Clone)]
pub struct LpView {
    pub quotes: Vec<QuoteView>,
    /// Pricing reference per asset: the live mid when the book is two-sided,
    /// otherwise the most recent recorded mid. `None` only before any mid
    /// has ever been observed.
    pub mids: Vec<Option<f64>>,
    /// Uncommitted cash and shares. Resting orders keep their escrow, so
    /// sizing off account totals would pile up doomed re-submissions.
    pub cash: Cents,
    pub holdings: Vec<i64>,
}

/// Pure quoting decision for one activation.
pub fn lp_step(view: &LpView, draws: &LpDraws) -> Vec<OrderSpec> {
    let mut orders = Vec::new();
    let cash = view.cash as f64 / 100.0;
    // Sell pass: offer stock above both the perturbed price and the ask.
    let mut buy_eligible = Vec::new();
    for (k, q) in view.quotes.iter().enumerate() {
        let Some(mid) = view.mids[k] else { continue };
        let p_limit = mid * (1.0 + draws.shifts[k]);
        if view.holdings[k] > 0 && mid < p_limit {
            let qty = (draws.sell_fractions[k] * view.holdings[k] as f64).floor() as u64;
            let Some(limit_px) = Price::from_dollars_ceil(p_limit) else { continue };
            let price = match q.ask {
                Some(ask) => limit_px.max(ask),
                None => limit_px,
            };
            if qty > 0 {
                orders.push(OrderSpec::limit(k as AssetId, Side::Sell, price, qty));
            }
        } else if cash > mid {
            buy_eligible.push((k, mid, p_limit));
        }
    }
    // Buy pass: flat Dirichlet cash split across the eligible assets.
    let weights = normalize_weights(
        buy_eligible.iter().map(|&(k, _, _)| draws.cash_spacings[k]).collect(),
    );
    for (&(k, _mid, p_limit), w) in buy_eligible.iter().zip(weights) {
        let Some(limit_px) = Price::from_dollars_floor(p_limit) else { continue };
        let price = match view.quotes[k].bid {
            Some(bid) => limit_px.min(bid),
            None => limit_px,
        };
        let qty = (w * cash / price.as_dollars()).floor() as u64;
        if qty > 0 {
            orders.push(OrderSpec::limit(k as AssetId, Side::Buy, price, qty));
        }
    }
    orders
}

pub struct LpAgent {
    session: ClientSession,
    rng: ChaCha12Rng,
    gate: ActivationGate,
    assets: u32,
    /// Volatility lookback in ticks (seconds).
    window: u32,
    sigma_fallback: f64,
}

impl LpAgent {
    pub fn new(
        session: ClientSession,
        rng: ChaCha12Rng,
        t_freq: f64,
        assets: u32,
        window: u32,
        sigma_fallback: f64,
    ) -> LpAgent {
        LpAgent { session, rng, gate: ActivationGate::new(t_freq), assets, window, sigma_fallback }
    }

    pub fn state(&self) -> FlowAgentState {
        FlowAgentState { account: self.session.account, rng: self.rng.clone() }
    }

    pub fn restore(
        state: FlowAgentState,
        session: ClientSession,
        t_freq: f64,
        assets: u32,
        window: u32,
        sigma_fallback: f64,
    ) -> LpAgent {
        assert_eq!(state.account, session.account);
        LpAgent {
            session,
            rng: state.rng,
            gate: ActivationGate::new(t_freq),
            assets,
            window,
            sigma_fallback,
        }
    }

    /// Recent mid history digested to (σ, latest point). σ runs over the
    /// per-tick view of the window and takes the fallback while degenerate
    /// (too short or pinned flat); the latest point backs pricing whenever
    /// the live book has lost a side.
    fn history_stats(&mut self, asset: AssetId, now: f64) -> Result<(f64, Option<f64>), AgentError> {
        let me = self.session.account;
        let since = (now - self.window as f64).max(0.0);
        let points = self
            .session
            .history(asset, since)
            .map_err(|source| AgentError { account: me, source })?;
        let per_tick = per_tick_sample(&points, now);
        let start = per_tick.len().saturating_sub(self.window as usize);
        let mids: Vec<f64> = per_tick[start..].iter().map(|&(_, m)| m).collect();
        let sigma = match realized_volatility(&mids) {
            Ok(s) if s > 0.0 => s,
            _ => self.sigma_fallback,
        };
        Ok((sigma, points.last().map(|&(_, m)| m)))
    }
}

impl TickAgent for LpAgent {
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
        let now = self.session.clock().map_err(wrap)?;
        let mut quotes = Vec::with_capacity(self.assets as usize);
        let mut sigmas = Vec::with_capacity(self.assets as usize);
        let mut mids = Vec::with_capacity(self.assets as usize);
        for k in 0..self.assets {
            let q = self.session.quote(k).map_err(wrap)?;
            let (sigma, last_mid) = self.history_stats(k, now)?;
            let mid = match q.mid.or(last_mid) {
                // Quiet market: the window has slid past the last recorded
                // point, so reach back through the full history.
                None => last_recorded_mid(&mut self.session, k).map_err(wrap)?,
                m => m,
            };
            mids.push(mid);
            quotes.push(q);
            sigmas.push(sigma);
        }
        let free_holdings = acct
            .holdings
            .iter()
            .zip(&acct.reserved_shares)
            .map(|(h, r)| h - r)
            .collect();
        let view = LpView {
            quotes,
            mids,
            cash: acct.cash - acct.reserved_cash,
            holdings: free_holdings,
        };
        let draws = LpDraws::sample(&mut self.rng, &sigmas);
        for spec in lp_step(&view, &draws) {
            tolerate_rejection(me, self.session.submit(spec))?;
        }
        Ok(())
    }
}
