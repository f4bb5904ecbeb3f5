//! Intelligent market maker: learns order flow and spread PnL online and
//! optimizes its quotes and hedging by deterministic grid search.
//!
//! Each cycle the agent estimates volatility and the market volume since its
//! last quote, solves for a market-share ε (`solve_target_eps`) and an
//! inventory-skew ε (`solve_skew_eps`), quotes both sides, hedges a solved
//! fraction of inventory (`solve_hedge_fraction`), then waits until total
//! volume moves before cancelling the remainders and feeding the realized
//! fills back into its recursive least-squares models.
//!
//! The agent trades one asset through a dealer account; cash and inventory
//! may go negative.

use crate::agents::{tolerate_rejection, AgentError, TickAgent};
use crate::client::ClientSession;
use crate::estimators::{
    feature_row_nu, feature_row_s, ia_sigma, realized_volatility, OnlineMoments, RlsEstimator,
    DEFAULT_P0,
};
use crate::types::{AccountId, AssetId, Price, Qty, Side};
use std::io::Write;
use thiserror::Error;

/// Every grid point produced a non-finite objective value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("objective non-finite over the whole grid")]
pub struct DegenerateObjective;

#[derive(Debug, Clone, Copy)]
pub struct IaConfig {
    /// Target share of market volume.
    pub eta_ms: f64,
    /// Acceptable deviation from the target share.
    pub delta_tol: f64,
    /// Risk aversion weight on the variance terms.
    pub gamma: f64,
    /// Inventory bound: post-hedge planned |z| must stay within it.
    pub z_max: i64,
    /// Quote size per side.
    pub order_size: Qty,
    /// Wait-loop poll period in simulated seconds.
    pub t_freq: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_step: f64,
    /// Break the wait loop after this many simulated seconds without volume.
    pub watchdog: f64,
}

impl Default for IaConfig {
    fn default() -> IaConfig {
        IaConfig {
            eta_ms: 0.25,
            delta_tol: 0.05,
            gamma: 2.0,
            z_max: 3000,
            order_size: 100,
            t_freq: 2.0,
            eps_min: -0.5,
            eps_max: 1.0,
            eps_step: 0.01,
            watchdog: 30.0,
        }
    }
}

/// Evenly spaced closed grid; the endpoint is always included.
pub fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && max > min);
    let n = ((max - min) / step).round() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

/// Step 1, target market share: among grid ε with
/// |η_ms − E(ν_ε)/V_market| ≤ δ_tol pick the largest (deepest, most
/// profitable); if none qualify, the argmin of the deviation. No volume
/// means no information: the previous ε is kept.
pub fn solve_target_eps(
    cfg: &IaConfig,
    e_nu: impl Fn(f64) -> f64,
    v_market: f64,
    prev_eps: f64,
) -> f64 {
    if !(v_market > 0.0) {
        return prev_eps;
    }
    let mut best_feasible: Option<f64> = None;
    let mut fallback: Option<(f64, f64)> = None;
    for eps in grid(cfg.eps_min, cfg.eps_max, cfg.eps_step) {
        let cost = (cfg.eta_ms - e_nu(eps) / v_market).abs();
        if !cost.is_finite() {
            continue;
        }
        if cost <= cfg.delta_tol {
            best_feasible = Some(eps);
        }
        if fallback.is_none_or(|(c, _)| cost < c) {
            fallback = Some((cost, eps));
        }
    }
    best_feasible.or(fallback.map(|(_, eps)| eps)).unwrap_or(prev_eps)
}

/// Step 2, inventory skew: grid argmin of
/// J(ε) = −S_ref·E(s_ε) + γ·√(S_ref²·var(s) + σ²·E((z+ν_ε)²))
/// with E((z+ν_ε)²) = (z + E(ν_ε))² + var(ν).
#[allow(clippy::too_many_arguments)]
pub fn solve_skew_eps(
    cfg: &IaConfig,
    e_nu: impl Fn(f64) -> f64,
    e_s: impl Fn(f64) -> f64,
    var_nu: f64,
    var_s: f64,
    s_ref: f64,
    sigma: f64,
    z: i64,
) -> Result<f64, DegenerateObjective> {
    let mut best: Option<(f64, f64)> = None;
    for eps in grid(cfg.eps_min, cfg.eps_max, cfg.eps_step) {
        let drift = z as f64 + e_nu(eps);
        let risk = s_ref * s_ref * var_s + sigma * sigma * (drift * drift + var_nu);
        let objective = -s_ref * e_s(eps) + cfg.gamma * risk.sqrt();
        if !objective.is_finite() {
            continue;
        }
        if best.is_none_or(|(j, _)| objective < j) {
            best = Some((objective, eps));
        }
    }
    best.map(|(_, eps)| eps).ok_or(DegenerateObjective)
}

/// Hedging: grid-minimize H(x) = |xz|·S_ref + γ·√(σ²·E((z(1−x)+ν_ε)²))
/// over x ∈ [0,1] step 0.01, excluding x whose planned post-hedge inventory
/// |z(1−x)| would exceed Z_max. E(ν_ε) is the flow expected on the quote
/// opposing the inventory sign.
pub fn solve_hedge_fraction(
    cfg: &IaConfig,
    z: i64,
    s_ref: f64,
    sigma: f64,
    e_nu_quoted: f64,
    var_nu: f64,
) -> f64 {
    if z == 0 {
        return 0.0;
    }
    let z = z as f64;
    let bound = cfg.z_max as f64 + 1e-9;
    let mut best: Option<(f64, f64)> = None;
    for x in grid(0.0, 1.0, 0.01) {
        let remainder = z * (1.0 - x);
        if remainder.abs() > bound {
            continue;
        }
        let drift = remainder + e_nu_quoted;
        let cost = (x * z).abs() * s_ref
            + cfg.gamma * (sigma * sigma * (drift * drift + var_nu)).sqrt();
        if !cost.is_finite() {
            continue;
        }
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, x));
        }
    }
    // x = 1 always satisfies the bound, so the feasible set is never empty.
    best.map(|(_, x)| x).unwrap_or(1.0)
}

/// The learned models: expected fill volume ν and normalized spread PnL s,
/// each a recursive least-squares fit plus running variance.
pub struct IaModels {
    pub nu: RlsEstimator,
    pub s: RlsEstimator,
    pub nu_moments: OnlineMoments,
    pub s_moments: OnlineMoments,
}

impl IaModels {
    pub fn new() -> IaModels {
        IaModels {
            nu: RlsEstimator::new(4, DEFAULT_P0),
            s: RlsEstimator::new(6, DEFAULT_P0),
            nu_moments: OnlineMoments::new(),
            s_moments: OnlineMoments::new(),
        }
    }

    pub fn predict_nu(&self, p_mid: f64, s_ref: f64, eps: f64) -> f64 {
        self.nu.predict(&feature_row_nu(p_mid, s_ref, eps)).expect("fixed dimension")
    }

    pub fn predict_s(&self, p_mid: f64, s_ref: f64, eps: f64) -> f64 {
        self.s.predict(&feature_row_s(p_mid, s_ref, eps)).expect("fixed dimension")
    }

    pub fn var_nu(&self) -> f64 {
        self.nu_moments.variance().unwrap_or(0.0)
    }

    pub fn var_s(&self) -> f64 {
        self.s_moments.variance().unwrap_or(0.0)
    }

    /// Record one side's realized fill: ν shares filled at depth ε.
    pub fn observe(&mut self, p_mid: f64, s_ref: f64, eps: f64, nu: f64) {
        let s = nu * (1.0 + eps);
        let _ = self.nu.update(&feature_row_nu(p_mid, s_ref, eps), nu);
        let _ = self.s.update(&feature_row_s(p_mid, s_ref, eps), s);
        self.nu_moments.update(nu);
        self.s_moments.update(s);
    }
}

impl Default for IaModels {
    fn default() -> IaModels {
        IaModels::new()
    }
}

struct LiveQuote {
    order_id: u64,
    eps: f64,
}

enum IaPhase {
    Quote { at: f64 },
    Wait { quoted_mid: f64, quoted_s_ref: f64, v_snapshot: u64, since: f64, next_poll: f64 },
}

pub struct IaAgent {
    session: ClientSession,
    cfg: IaConfig,
    asset: AssetId,
    models: IaModels,
    inventory: i64,
    last_v_total: u64,
    last_mid: Option<f64>,
    mids: Vec<f64>,
    last_eps_star: f64,
    bid: Option<LiveQuote>,
    ask: Option<LiveQuote>,
    phase: IaPhase,
    diag: Option<Box<dyn Write + Send>>,
}

impl IaAgent {
    pub fn new(
        mut session: ClientSession,
        cfg: IaConfig,
        asset: AssetId,
    ) -> Result<IaAgent, AgentError> {
        let account = session.account;
        let view = session.account().map_err(|source| AgentError { account, source })?;
        Ok(IaAgent {
            session,
            cfg,
            asset,
            models: IaModels::new(),
            inventory: view.holdings.get(asset as usize).copied().unwrap_or(0),
            last_v_total: 0,
            last_mid: None,
            mids: Vec::new(),
            last_eps_star: 0.0,
            bid: None,
            ask: None,
            phase: IaPhase::Quote { at: 0.0 },
            diag: None,
        })
    }

    /// Stream per-cycle diagnostics as CSV rows
    /// `t,eps_star,eps_skew,x_hedge,z,cash,E_nu,E_s`.
    pub fn with_diagnostics(mut self, mut sink: Box<dyn Write + Send>) -> IaAgent {
        let _ = writeln!(sink, "t,eps_star,eps_skew,x_hedge,z,cash,E_nu,E_s");
        self.diag = Some(sink);
        self
    }

    pub fn inventory(&self) -> i64 {
        self.inventory
    }

    pub fn models(&self) -> &IaModels {
        &self.models
    }

    fn wrap(&self, source: crate::client::ClientError) -> AgentError {
        AgentError { account: self.session.account, source }
    }

    /// One full quoting pass: estimate, solve, submit quotes and hedge.
    fn quote_cycle(&mut self, t: f64) -> Result<(), AgentError> {
        let me = self.session.account;
        let q = self.session.quote(self.asset).map_err(|e| self.wrap(e))?;
        let (Some(mid), Some(bid_px), Some(ask_px)) = (q.mid, q.bid, q.ask) else {
            // Empty book: nothing to anchor quotes on; retry next poll.
            self.phase = IaPhase::Quote { at: t + self.cfg.t_freq };
            return Ok(());
        };
        let s_ref = (((ask_px.ticks() - bid_px.ticks()) as f64) * 0.005).max(Price::TICK);

        self.mids.push(mid);
        let sigma_returns = realized_volatility(&self.mids).unwrap_or(0.0);
        let delta_mid = self.last_mid.map_or(0.0, |m| mid - m);
        let sigma = ia_sigma(sigma_returns, delta_mid);
        self.last_mid = Some(mid);

        let v_now = self.session.volume(self.asset).map_err(|e| self.wrap(e))?;
        let v_market = v_now.saturating_sub(self.last_v_total) as f64;
        self.last_v_total = v_now;

        let models = &self.models;
        let eps_star = solve_target_eps(
            &self.cfg,
            |eps| models.predict_nu(mid, s_ref, eps),
            v_market,
            self.last_eps_star,
        );
        self.last_eps_star = eps_star;
        let eps_skew = solve_skew_eps(
            &self.cfg,
            |eps| models.predict_nu(mid, s_ref, eps),
            |eps| models.predict_s(mid, s_ref, eps),
            models.var_nu(),
            models.var_s(),
            s_ref,
            sigma,
            self.inventory,
        )
        .unwrap_or(eps_star);

        // Long inventory: target-share ε prices the bid, the skew ε sets the
        // ask to shed shares. Short or flat: mirrored.
        let (eps_bid, eps_ask) =
            if self.inventory > 0 { (eps_star, eps_skew) } else { (eps_skew, eps_star) };
        let bid_quote = Price::from_dollars_floor(mid - s_ref * (1.0 + eps_bid));
        let ask_quote = Price::from_dollars_ceil(mid + s_ref * (1.0 + eps_ask));
        let (Some(bid_quote), Some(ask_quote)) = (bid_quote, ask_quote) else {
            self.phase = IaPhase::Quote { at: t + self.cfg.t_freq };
            return Ok(());
        };

        self.bid = tolerate_rejection(
            me,
            self.session.submit_limit(self.asset, Side::Buy, bid_quote, self.cfg.order_size),
        )?
        .map(|ack| LiveQuote { order_id: ack.order_id, eps: eps_bid });
        self.ask = tolerate_rejection(
            me,
            self.session.submit_limit(self.asset, Side::Sell, ask_quote, self.cfg.order_size),
        )?
        .map(|ack| LiveQuote { order_id: ack.order_id, eps: eps_ask });

        // The hedge unwinds toward flat, so the flow that matters is the
        // quote opposing the inventory sign — the ε_skew side.
        let x_hedge = solve_hedge_fraction(
            &self.cfg,
            self.inventory,
            s_ref,
            sigma,
            self.models.predict_nu(mid, s_ref, eps_skew),
            self.models.var_nu(),
        );
        let hedge_qty = (x_hedge * self.inventory.unsigned_abs() as f64).floor() as u64;
        if hedge_qty > 0 {
            let side = if self.inventory > 0 { Side::Sell } else { Side::Buy };
            tolerate_rejection(me, self.session.submit_market(self.asset, side, hedge_qty))?;
        }

        if let Some(diag) = &mut self.diag {
            let cash = 0; // refreshed at settle; quote-time cash is stale anyway
            let _ = cash;
            let e_nu = self.models.predict_nu(mid, s_ref, eps_star);
            let e_s = self.models.predict_s(mid, s_ref, eps_skew);
            let _ = writeln!(
                diag,
                "{t},{eps_star:.4},{eps_skew:.4},{x_hedge:.2},{z},{cash},{e_nu:.4},{e_s:.4}",
                z = self.inventory,
            );
        }

        // Snapshot volume after our own orders so the hedge fill does not
        // count as the market moving.
        let v_snapshot = self.session.volume(self.asset).map_err(|e| self.wrap(e))?;
        self.phase = IaPhase::Wait {
            quoted_mid: mid,
            quoted_s_ref: s_ref,
            v_snapshot,
            since: t,
            next_poll: t + self.cfg.t_freq,
        };
        Ok(())
    }

    /// Cancel leftovers, measure fills, refresh the account, learn.
    fn settle_cycle(&mut self, quoted_mid: f64, quoted_s_ref: f64) -> Result<(), AgentError> {
        for quote in [self.bid.take(), self.ask.take()].into_iter().flatten() {
            let cancelled =
                self.session.cancel(self.asset, quote.order_id).map_err(|e| self.wrap(e))?;
            let filled = self.cfg.order_size.saturating_sub(cancelled);
            self.models.observe(quoted_mid, quoted_s_ref, quote.eps, filled as f64);
        }
        let view = self.session.account().map_err(|e| self.wrap(e))?;
        self.inventory = view.holdings.get(self.asset as usize).copied().unwrap_or(0);
        Ok(())
    }
}

impl TickAgent for IaAgent {
    fn account(&self) -> AccountId {
        self.session.account
    }

    fn on_tick(&mut self, t: u64) -> Result<(), AgentError> {
        let now = t as f64;
        match self.phase {
            IaPhase::Quote { at } => {
                if now >= at {
                    self.quote_cycle(now)?;
                }
            }
            IaPhase::Wait { quoted_mid, quoted_s_ref, v_snapshot, since, next_poll } => {
                if now < next_poll {
                    return Ok(());
                }
                let v_now = self.session.volume(self.asset).map_err(|e| self.wrap(e))?;
                if v_now != v_snapshot || now - since >= self.cfg.watchdog {
                    self.settle_cycle(quoted_mid, quoted_s_ref)?;
                    self.phase = IaPhase::Quote { at: now + self.cfg.t_freq };
                } else {
                    self.phase = IaPhase::Wait {
                        quoted_mid,
                        quoted_s_ref,
                        v_snapshot,
                        since,
                        next_poll: now + self.cfg.t_freq,
                    };
                }
            }
        }
        Ok(())
    }
}
