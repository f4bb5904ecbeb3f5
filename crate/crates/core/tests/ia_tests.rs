//! Adaptive agent oracles: the three grid solvers against a 10x finer
//! brute-force search, and a live quote/settle cycle on a real venue.

use cdasim::agents::{LtAgent, TickAgent};
use cdasim::client::ClientSession;
use cdasim::clock::SimClock;
use cdasim::events::EventBody;
use cdasim::exchange::{Exchange, OrderSpec};
use cdasim::ia::{solve_hedge_fraction, solve_skew_eps, solve_target_eps, IaAgent, IaConfig};
use cdasim::ledger::AccountKind;
use cdasim::rng::{agent_stream, substream};
use cdasim::types::{Price, Side};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

/// One sampled "state of the world" as the solvers see it: with mid and
/// reference spread fixed for the cycle, the fill model is affine in eps
/// and the spread model cubic in eps.
#[derive(Debug, Clone, Copy)]
struct SolverState {
    c0: f64,
    c1: f64,
    d: [f64; 4],
    var_nu: f64,
    var_s: f64,
    s_ref: f64,
    sigma: f64,
    z: i64,
    v_market: f64,
    prev_eps: f64,
}

impl SolverState {
    fn sample(rng: &mut ChaCha12Rng) -> SolverState {
        SolverState {
            c0: rng.gen_range(-100.0..300.0),
            c1: rng.gen_range(-200.0..200.0),
            d: [
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ],
            var_nu: rng.gen_range(0.0..400.0),
            var_s: rng.gen_range(0.0..4.0),
            s_ref: rng.gen_range(0.01..1.5),
            sigma: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..0.08) },
            z: if rng.gen_bool(0.2) { 0 } else { rng.gen_range(-4_500..=4_500) },
            v_market: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(1.0..1_000.0) },
            prev_eps: rng.gen_range(-0.5..1.0),
        }
    }

    fn e_nu(&self, eps: f64) -> f64 {
        self.c0 + self.c1 * eps
    }

    fn e_s(&self, eps: f64) -> f64 {
        self.d[0] + self.d[1] * eps + self.d[2] * eps * eps + self.d[3] * eps * eps * eps
    }
}

/// Plain loop over an inclusive fine grid; written from the decision rules,
/// not from the production solver.
fn fine_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step).round() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

fn oracle_target(cfg: &IaConfig, st: &SolverState, step: f64) -> f64 {
    if st.v_market <= 0.0 {
        return st.prev_eps;
    }
    let mut max_feasible = None;
    let mut least_bad: Option<(f64, f64)> = None;
    for eps in fine_grid(cfg.eps_min, cfg.eps_max, step) {
        let dev = (cfg.eta_ms - st.e_nu(eps) / st.v_market).abs();
        if !dev.is_finite() {
            continue;
        }
        if dev <= cfg.delta_tol {
            max_feasible = Some(eps);
        }
        match least_bad {
            Some((best, _)) if dev >= best => {}
            _ => least_bad = Some((dev, eps)),
        }
    }
    max_feasible.or(least_bad.map(|(_, e)| e)).unwrap_or(st.prev_eps)
}

fn oracle_skew(cfg: &IaConfig, st: &SolverState, step: f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for eps in fine_grid(cfg.eps_min, cfg.eps_max, step) {
        let drift = st.z as f64 + st.e_nu(eps);
        let variance = st.s_ref * st.s_ref * st.var_s
            + st.sigma * st.sigma * (drift * drift + st.var_nu);
        let j = -st.s_ref * st.e_s(eps) + cfg.gamma * variance.sqrt();
        if !j.is_finite() {
            continue;
        }
        match best {
            Some((jb, _)) if j >= jb => {}
            _ => best = Some((j, eps)),
        }
    }
    best.expect("finite coefficients").1
}

fn oracle_hedge(cfg: &IaConfig, st: &SolverState, e_nu_quoted: f64, step: f64) -> f64 {
    if st.z == 0 {
        return 0.0;
    }
    let z = st.z as f64;
    let mut best: Option<(f64, f64)> = None;
    for x in fine_grid(0.0, 1.0, step) {
        let kept = z * (1.0 - x);
        if kept.abs() > cfg.z_max as f64 + 1e-9 {
            continue;
        }
        let drift = kept + e_nu_quoted;
        let h = (x * z).abs() * st.s_ref
            + cfg.gamma * (st.sigma * st.sigma * (drift * drift + st.var_nu)).sqrt();
        match best {
            Some((hb, _)) if h >= hb => {}
            _ => best = Some((h, x)),
        }
    }
    best.expect("x = 1 is always feasible").1
}

#[test]
fn solvers_land_within_one_step_of_a_finer_grid() {
    let cfg = IaConfig::default();
    let coarse = cfg.eps_step;
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    for case in 0..1_000 {
        let st = SolverState::sample(&mut rng);

        let got = solve_target_eps(&cfg, |e| st.e_nu(e), st.v_market, st.prev_eps);
        let want = oracle_target(&cfg, &st, coarse / 10.0);
        assert!(
            (got - want).abs() <= coarse + 1e-9,
            "target case {case}: {got} vs fine {want} ({st:?})"
        );

        let got = solve_skew_eps(
            &cfg,
            |e| st.e_nu(e),
            |e| st.e_s(e),
            st.var_nu,
            st.var_s,
            st.s_ref,
            st.sigma,
            st.z,
        )
        .unwrap();
        let want = oracle_skew(&cfg, &st, coarse / 10.0);
        assert!(
            (got - want).abs() <= coarse + 1e-9,
            "skew case {case}: {got} vs fine {want} ({st:?})"
        );

        let e_nu_quoted = st.e_nu(got);
        let got_x = solve_hedge_fraction(&cfg, st.z, st.s_ref, st.sigma, e_nu_quoted, st.var_nu);
        let want_x = oracle_hedge(&cfg, &st, e_nu_quoted, 0.001);
        assert!(
            (got_x - want_x).abs() <= 0.01 + 1e-9,
            "hedge case {case}: {got_x} vs fine {want_x} ({st:?})"
        );
    }
}

#[test]
fn hedge_never_plans_inventory_beyond_the_cap() {
    let cfg = IaConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for _ in 0..500 {
        let st = SolverState::sample(&mut rng);
        let x = solve_hedge_fraction(&cfg, st.z, st.s_ref, st.sigma, st.e_nu(0.0), st.var_nu);
        assert!((0.0..=1.0).contains(&x));
        let kept = (st.z as f64 * (1.0 - x)).abs();
        assert!(
            kept <= cfg.z_max as f64 + 1e-6,
            "z {} hedged with x {x} keeps {kept}",
            st.z
        );
    }
}

#[test]
fn adaptive_agent_completes_quote_and_settle_cycles() {
    let clock = Arc::new(SimClock::virtual_at(0.0));
    let ex = Exchange::new(1, 100_000.0, clock);
    let dealer = ex.create_account(AccountKind::Dealer, 0, vec![0]);
    for lvl in 1..=5i64 {
        let bid = Price::from_ticks(10_000 - lvl).unwrap();
        let ask = Price::from_ticks(10_000 + lvl).unwrap();
        ex.submit_order(dealer, OrderSpec::limit(0, Side::Buy, bid, 1_000_000)).unwrap();
        ex.submit_order(dealer, OrderSpec::limit(0, Side::Sell, ask, 1_000_000)).unwrap();
    }
    let ex = Arc::new(ex);

    let trader = ex.create_account(AccountKind::Standard, 100_000_00, vec![5_000]);
    let mut lt = LtAgent::new(
        ClientSession::loopback(Arc::clone(&ex), trader),
        substream(5, agent_stream(trader)),
        2.0,
        1,
    );

    let ia_account = ex.create_account(AccountKind::Dealer, 0, vec![0]);
    let cfg = IaConfig { t_freq: 2.0, ..IaConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    let diag_path = dir.path().join("diag.csv");
    let mut ia = IaAgent::new(
        ClientSession::loopback(Arc::clone(&ex), ia_account),
        cfg.clone(),
        0,
    )
    .unwrap()
    .with_diagnostics(Box::new(std::fs::File::create(&diag_path).unwrap()));

    for t in 0..400u64 {
        ex.clock().set(t as f64);
        lt.on_tick(t).unwrap();
        ia.on_tick(t).unwrap();
    }

    let events = ex.take_events();
    let ia_quotes = events
        .iter()
        .filter(|e| {
            matches!(&e.body, EventBody::OrderAccepted { desc, .. }
                if desc.account == ia_account && desc.price.is_some())
        })
        .count();
    let ia_cancels = events
        .iter()
        .filter(|e| {
            matches!(&e.body, EventBody::OrderCancelled { account, .. } if *account == ia_account)
        })
        .count();
    assert!(ia_quotes >= 20, "expected repeated quoting, saw {ia_quotes}");
    assert!(ia_cancels > 0, "settlement must retire unfilled quotes");
    assert!(
        ia.inventory().abs() <= cfg.z_max + cfg.order_size as i64,
        "inventory {} exceeded the cap by more than one order",
        ia.inventory()
    );

    let diag = std::fs::read_to_string(&diag_path).unwrap();
    assert!(diag.starts_with("t,eps_star,eps_skew,x_hedge,z,cash,E_nu,E_s"));
    assert!(diag.lines().count() > 10, "diagnostics should log every cycle");
}
