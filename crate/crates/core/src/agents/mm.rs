//! Market makers: quote both sides around the mid, then hedge and refresh.
//!
//! Each activation places a bid at `mid − S_ref(1+ε_buy)` and an ask at
//! `mid + S_ref(1+ε_sell)` with `ε ~ U(ε_min, ε_max)` — larger ε is deeper
//! in the book — plus a market order hedging a random fraction of current
//! inventory. One tick later the unfilled quotes are cancelled and the
//! dealer's inventory and cash are refreshed from the exchange.

use super::{tolerate_rejection, ActivationGate, AgentError, TickAgent};
use crate::client::ClientSession;
use crate::types::{AccountId, AssetId, Price, Qty, Side};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub const DEFAULT_EPS_MIN: f64 = -0.5;
pub const DEFAULT_EPS_MAX: f64 = 1.0;
pub const DEFAULT_ORDER_SIZE: Qty = 100;

/// Randomness for quoting one asset.
#[derive(Debug, Clone, Copy)]
pub struct MmDraws {
    pub eps_buy: f64,
    pub eps_sell: f64,
    pub hedge_fraction: f64,
}

impl MmDraws {
    pub fn sample(rng: &mut impl Rng, eps_min: f64, eps_max: f64) -> MmDraws {
        MmDraws {
            eps_buy: rng.gen_range(eps_min..=eps_max),
            eps_sell: rng.gen_range(eps_min..=eps_max),
            hedge_fraction: rng.gen(),
        }
    }
}

/// Quote prices for given draws. `None` when the mid is too small to
/// produce a positive bid. Never crosses: `ε > −1` keeps bid < mid < ask.
pub fn mm_quotes(mid: f64, s_ref: f64, eps_buy: f64, eps_sell: f64) -> Option<(Price, Price)> {
    let bid = Price::from_dollars_floor(mid - s_ref * (1.0 + eps_buy))?;
    let ask = Price::from_dollars_ceil(mid + s_ref * (1.0 + eps_sell))?;
    debug_assert!(bid < ask);
    Some((bid, ask))
}

/// Hedge order that unwinds `fraction` of the inventory `z`.
pub fn mm_hedge(z: i64, fraction: f64) -> Option<(Side, Qty)> {
    let qty = (fraction * z.unsigned_abs() as f64).floor() as u64;
    if z == 0 || qty == 0 {
        return None;
    }
    Some((if z > 0 { Side::Sell } else { Side::Buy }, qty))
}

enum MmPhase {
    Idle,
    AwaitCancel { at: u64 },
}

pub struct MmAgent {
    session: ClientSession,
    rng: ChaCha12Rng,
    gate: ActivationGate,
    assets: u32,
    eps_min: f64,
    eps_max: f64,
    order_size: Qty,
    inventory: Vec<i64>,
    live: Vec<(AssetId, u64)>,
    phase: MmPhase,
}

impl MmAgent {
    pub fn new(
        mut session: ClientSession,
        rng: ChaCha12Rng,
        t_freq: f64,
        assets: u32,
    ) -> Result<MmAgent, AgentError> {
        let account = session.account;
        let view = session.account().map_err(|source| AgentError { account, source })?;
        Ok(MmAgent {
            session,
            rng,
            gate: ActivationGate::new(t_freq),
            assets,
            eps_min: DEFAULT_EPS_MIN,
            eps_max: DEFAULT_EPS_MAX,
            order_size: DEFAULT_ORDER_SIZE,
            inventory: view.holdings,
            live: Vec::new(),
            phase: MmPhase::Idle,
        })
    }

    pub fn with_spread_range(mut self, eps_min: f64, eps_max: f64) -> MmAgent {
        assert!(eps_min < eps_max && eps_min > -1.0);
        self.eps_min = eps_min;
        self.eps_max = eps_max;
        self
    }

    pub fn with_order_size(mut self, size: Qty) -> MmAgent {
        assert!(size >= 1);
        self.order_size = size;
        self
    }

    fn quote_all(&mut self, t: u64) -> Result<(), AgentError> {
        let me = self.session.account;
        let wrap = |source| AgentError { account: me, source };
        for k in 0..self.assets {
            let q = self.session.quote(k).map_err(wrap)?;
            let (Some(mid), Some(bid), Some(ask)) = (q.mid, q.bid, q.ask) else { continue };
            let s_ref = (((ask.ticks() - bid.ticks()) as f64) * 0.005).max(Price::TICK);
            let draws = MmDraws::sample(&mut self.rng, self.eps_min, self.eps_max);
            let Some((bid_px, ask_px)) = mm_quotes(mid, s_ref, draws.eps_buy, draws.eps_sell)
            else {
                continue;
            };
            if let Some(ack) =
                tolerate_rejection(me, self.session.submit_limit(k, Side::Buy, bid_px, self.order_size))?
            {
                self.live.push((k, ack.order_id));
            }
            if let Some(ack) =
                tolerate_rejection(me, self.session.submit_limit(k, Side::Sell, ask_px, self.order_size))?
            {
                self.live.push((k, ack.order_id));
            }
            if let Some((side, qty)) = mm_hedge(self.inventory[k as usize], draws.hedge_fraction) {
                tolerate_rejection(me, self.session.submit_market(k, side, qty))?;
            }
        }
        self.phase = MmPhase::AwaitCancel { at: t + 1 };
        Ok(())
    }

    fn cancel_and_refresh(&mut self) -> Result<(), AgentError> {
        let me = self.session.account;
        let wrap = |source| AgentError { account: me, source };
        for (asset, order) in std::mem::take(&mut self.live) {
            self.session.cancel(asset, order).map_err(wrap)?;
        }
        let view = self.session.account().map_err(wrap)?;
        self.inventory = view.holdings;
        self.phase = MmPhase::Idle;
        Ok(())
    }
}

impl TickAgent for MmAgent {
    fn account(&self) -> AccountId {
        self.session.account
    }

    fn on_tick(&mut self, t: u64) -> Result<(), AgentError> {
        // The gate draw happens every tick, busy or not, so the stream
        // position depends only on tick count.
        let u: f64 = self.rng.gen();
        match self.phase {
            MmPhase::Idle => {
                if self.gate.fires(u) {
                    self.quote_all(t)?;
                }
            }
            MmPhase::AwaitCancel { at } => {
                if t >= at {
                    self.cancel_and_refresh()?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_spread_quotes() {
        let (bid, ask) = mm_quotes(100.0, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(bid, Price::parse("99.50").unwrap());
        assert_eq!(ask, Price::parse("100.50").unwrap());
    }

    #[test]
    fn aggressive_buy_tightens_bid() {
        let (bid, _) = mm_quotes(100.0, 0.5, -0.5, 0.0).unwrap();
        assert_eq!(bid, Price::parse("99.75").unwrap());
    }

    #[test]
    fn quotes_never_cross_across_draw_grid() {
        for i in 0..=30 {
            let eps_buy = -0.5 + i as f64 * 0.05;
            for j in 0..=30 {
                let eps_sell = -0.5 + j as f64 * 0.05;
                let (bid, ask) = mm_quotes(100.0, 0.01, eps_buy, eps_sell).unwrap();
                assert!(bid < ask, "crossed at ({eps_buy}, {eps_sell})");
            }
        }
    }

    #[test]
    fn hedge_unwinds_inventory() {
        assert_eq!(mm_hedge(80, 0.5), Some((Side::Sell, 40)));
        assert_eq!(mm_hedge(-80, 0.5), Some((Side::Buy, 40)));
        assert_eq!(mm_hedge(0, 0.9), None);
        assert_eq!(mm_hedge(3, 0.1), None); // floor(0.3) = 0
    }
}
