//! Report emission: CSV series, verdict sheets, SVG plots, run summary.
//!
//! Everything here is a pure function of the in-memory [`RunReport`], so
//! re-emitting the same report produces byte-identical files.

use crate::scenario::RunReport;
use crate::stats::{
    acf, excess_kurtosis, first_passage_times, log_returns, nonlinear_acf_suite, FactsReport,
};
use crate::svg::{histogram, render_grid, PlotPanel, PlotSeries};
use crate::types::Price;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `t,asset,p_mid` rows, one per mid-price change.
pub fn price_series_csv(asset: u32, series: &[(f64, f64)]) -> String {
    let mut out = String::from("t,asset,p_mid\n");
    for &(t, mid) in series {
        let _ = writeln!(out, "{t},{asset},{mid:.3}");
    }
    out
}

/// `t,asset,qty` rows, traded shares aggregated per whole tick.
pub fn volume_series_csv(asset: u32, series: &[(u64, u64)]) -> String {
    let mut out = String::from("t,asset,qty\n");
    for &(t, qty) in series {
        let _ = writeln!(out, "{t},{asset},{qty}");
    }
    out
}

/// `fact,verdict,metric,detail` verdict sheet.
pub fn facts_csv(facts: &FactsReport) -> String {
    let mut out = String::from("fact,verdict,metric,detail\n");
    for (name, fact) in facts.facts() {
        let _ = writeln!(
            out,
            "{name},{},{:.6},{}",
            fact.verdict.as_str(),
            fact.metric,
            csv_field(&fact.detail)
        );
    }
    if let Some(fp) = &facts.first_passage {
        let _ = writeln!(
            out,
            "first_passage,descriptive,{:.6},{}",
            fp.rho,
            csv_field(&format!(
                "gains {} (mean {:.1}), losses {} (mean {:.1}), censored {}",
                fp.gain_count, fp.mean_gain, fp.loss_count, fp.mean_loss, fp.censored
            ))
        );
    }
    out
}

/// Parse a `t,asset,p_mid` CSV back into per-asset series, in first-seen
/// asset order.
pub fn parse_price_series(text: &str) -> Result<Vec<(u32, Vec<(f64, f64)>)>, String> {
    let mut series: Vec<(u32, Vec<(f64, f64)>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (i == 0 && line.starts_with("t,")) {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(t), Some(asset), Some(mid)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("line {}: expected t,asset,p_mid", i + 1));
        };
        let t: f64 = t.trim().parse().map_err(|e| format!("line {}: t: {e}", i + 1))?;
        let asset: u32 =
            asset.trim().parse().map_err(|e| format!("line {}: asset: {e}", i + 1))?;
        let mid: f64 =
            mid.trim().parse().map_err(|e| format!("line {}: p_mid: {e}", i + 1))?;
        match series.iter_mut().find(|(a, _)| *a == asset) {
            Some((_, points)) => points.push((t, mid)),
            None => series.push((asset, vec![(t, mid)])),
        }
    }
    Ok(series)
}

/// Price/bid-ask and spread panels for one asset.
pub fn market_panels(
    asset: u32,
    mids: &[(f64, f64)],
    quotes: &[(f64, Option<i64>, Option<i64>)],
) -> Vec<PlotPanel> {
    let bid: Vec<(f64, f64)> = quotes
        .iter()
        .filter_map(|&(t, b, _)| b.map(|v| (t, v as f64 * Price::TICK)))
        .collect();
    let ask: Vec<(f64, f64)> = quotes
        .iter()
        .filter_map(|&(t, _, a)| a.map(|v| (t, v as f64 * Price::TICK)))
        .collect();
    let spread: Vec<(f64, f64)> = quotes
        .iter()
        .filter_map(|&(t, b, a)| match (b, a) {
            (Some(b), Some(a)) => Some((t, (a - b) as f64 * Price::TICK)),
            _ => None,
        })
        .collect();
    vec![
        PlotPanel::lines(format!("asset {asset}: price"))
            .with_axis_labels("t (s)", "price ($)")
            .with_series(PlotSeries::new("mid", mids.to_vec()))
            .with_series(PlotSeries::new("bid", bid))
            .with_series(PlotSeries::new("ask", ask)),
        PlotPanel::lines(format!("asset {asset}: bid-ask spread"))
            .with_axis_labels("t (s)", "spread ($)")
            .with_series(PlotSeries::new("spread", spread)),
    ]
}

/// The six stylized-fact panels for one mid-price series.
pub fn fact_panels(asset: u32, mids: &[f64]) -> Vec<PlotPanel> {
    let returns = log_returns(mids, 1).unwrap_or_default();

    let dist = {
        let mut p = PlotPanel::bars(format!("(a) returns distribution, asset {asset}"))
            .with_axis_labels("r", "count");
        if !returns.is_empty() {
            let title = match excess_kurtosis(&returns) {
                Ok(k) => format!("(a) returns, excess kurtosis {k:.2}"),
                Err(_) => p.title.clone(),
            };
            p.title = title;
            p = p.with_series(PlotSeries::new("r", histogram(&returns, 41)));
        }
        p
    };

    let raw_acf = {
        let mut p = PlotPanel::bars("(b) return autocorrelation")
            .with_axis_labels("lag", "acf");
        if let Ok(res) = acf(&returns, 50) {
            let pts: Vec<(f64, f64)> =
                res.lags().map(|(k, c)| (k as f64, c)).collect();
            p = p
                .with_series(PlotSeries::new("r", pts))
                .with_guides(vec![res.ci_band, -res.ci_band]);
        }
        p
    };

    let abs_acf = {
        let mut p = PlotPanel::bars("(c) |r| autocorrelation")
            .with_axis_labels("lag", "acf");
        let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        if let Ok(res) = acf(&abs, 20) {
            let pts: Vec<(f64, f64)> =
                res.lags().map(|(k, c)| (k as f64, c)).collect();
            p = p
                .with_series(PlotSeries::new("|r|", pts))
                .with_guides(vec![res.ci_band, -res.ci_band]);
        }
        p
    };

    let nonlinear = {
        let mut p = PlotPanel::lines("(d) nonlinear transform acfs")
            .with_axis_labels("lag", "acf");
        if let Ok(suite) = nonlinear_acf_suite(&returns, 20) {
            let mut band = None;
            for (tr, res) in &suite {
                band = Some(res.ci_band);
                let pts: Vec<(f64, f64)> =
                    res.lags().map(|(k, c)| (k as f64, c)).collect();
                p = p.with_series(PlotSeries::new(tr.label(), pts));
            }
            if let Some(b) = band {
                p = p.with_guides(vec![b, -b]);
            }
        }
        p
    };

    let passage = {
        let mut p = PlotPanel::bars("(e) first-passage times (rho = 5 std)")
            .with_axis_labels("tau (ticks)", "count");
        if let Ok(fp) = first_passage_times(mids, 5.0) {
            let gains: Vec<f64> = fp.gains.iter().map(|&g| g as f64).collect();
            let losses: Vec<f64> = fp.losses.iter().map(|&l| l as f64).collect();
            if !gains.is_empty() {
                p = p.with_series(PlotSeries::new("gain", histogram(&gains, 30)));
            }
            if !losses.is_empty() {
                p = p.with_series(PlotSeries::new("loss", histogram(&losses, 30)));
            }
        }
        p
    };

    let aggregation = {
        let mut p = PlotPanel::lines("(f) aggregational normality")
            .with_axis_labels("r", "count");
        for stride in [1usize, 2, 5] {
            if let Ok(rs) = log_returns(mids, stride) {
                if rs.len() >= 4 {
                    p = p.with_series(PlotSeries::new(
                        format!("stride {stride}"),
                        histogram(&rs, 41),
                    ));
                }
            }
        }
        p
    };

    vec![dist, raw_acf, abs_acf, nonlinear, passage, aggregation]
}

/// Plain-text run summary.
pub fn summary_text(report: &RunReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(out, "run summary");
    let _ = writeln!(out, "===========");
    let _ = writeln!(
        out,
        "agents: {} LT, {} LP, {} MM, {} IA; assets: {}; t_close: {}s; seed: {}",
        c.n_lt, c.n_lp, c.n_mm, c.n_ia, c.assets, c.t_close, c.seed
    );
    let _ = writeln!(out, "events: {}   trades: {}", report.last_seq, report.trade_count);
    let _ = writeln!(
        out,
        "conservation: {}",
        if report.audit.is_clean() { "clean" } else { "VIOLATED" }
    );
    if !report.audit.is_clean() {
        let _ = writeln!(out, "  cash delta (cents): {}", report.audit.cash_delta);
        let _ = writeln!(out, "  share deltas: {:?}", report.audit.share_deltas);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "per-type PnL (holdings at initial/final mids, dollars)");
    for p in &report.pnl {
        let _ = writeln!(
            out,
            "  {:<20} x{:<6} initial {:>14.2}  final {:>14.2}  pnl {:>+12.2}",
            p.label,
            p.accounts,
            p.initial_value,
            p.final_value,
            p.pnl()
        );
    }
    let _ = writeln!(out);
    for (k, facts) in report.facts.iter().enumerate() {
        let _ = writeln!(
            out,
            "asset {k}: initial mid {:.2}, final mid {:.2}, mean spread {:.4}, \
             return variance {:.3e}",
            report.initial_mids[k],
            report.final_mids[k],
            report.mean_spread[k],
            report.return_variance[k]
        );
        for (name, fact) in facts.facts() {
            let _ = writeln!(
                out,
                "  {:<26} {:<12} {}",
                name,
                fact.verdict.as_str(),
                fact.detail
            );
        }
        if let Some(fp) = &facts.first_passage {
            let _ = writeln!(
                out,
                "  first_passage              descriptive  gains {} (mean {:.1}), \
                 losses {} (mean {:.1}), censored {}",
                fp.gain_count, fp.mean_gain, fp.loss_count, fp.mean_loss, fp.censored
            );
        }
    }
    out
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> io::Result<()> {
    std::fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Write every artifact for a finished run; returns the paths written.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for k in 0..report.config.assets {
        let i = k as usize;
        write(
            out_dir.join(format!("prices_{k}.csv")),
            &price_series_csv(k, &report.prices[i]),
            &mut written,
        )?;
        write(
            out_dir.join(format!("volume_{k}.csv")),
            &volume_series_csv(k, &report.volumes[i]),
            &mut written,
        )?;
        write(
            out_dir.join(format!("facts_{k}.csv")),
            &facts_csv(&report.facts[i]),
            &mut written,
        )?;
        let market = market_panels(k, &report.prices[i], &report.quotes[i]);
        write(
            out_dir.join(format!("market_{k}.svg")),
            &render_grid(&market, 2, 480, 320),
            &mut written,
        )?;
        let mids: Vec<f64> = report.prices[i].iter().map(|&(_, m)| m).collect();
        let panels = fact_panels(k, &mids);
        write(
            out_dir.join(format!("panels_{k}.svg")),
            &render_grid(&panels, 3, 380, 280),
            &mut written,
        )?;
    }
    write(out_dir.join("summary.txt"), &summary_text(report), &mut written)?;
    Ok(written)
}

/// Validate an existing `t,asset,p_mid` series file: verdict sheet and
/// panels per asset found in it.
pub fn validate_series_file(
    series_path: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, String> {
    let text = std::fs::read_to_string(series_path).map_err(|e| e.to_string())?;
    let series = parse_price_series(&text)?;
    if series.is_empty() {
        return Err("no data rows in series file".into());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let mut written = Vec::new();
    for (asset, points) in &series {
        let mids: Vec<f64> = points.iter().map(|&(_, m)| m).collect();
        let facts = crate::stats::validate_run(&mids, &Default::default());
        write(
            out_dir.join(format!("facts_{asset}.csv")),
            &facts_csv(&facts),
            &mut written,
        )
        .map_err(|e| e.to_string())?;
        let panels = fact_panels(*asset, &mids);
        write(
            out_dir.join(format!("panels_{asset}.svg")),
            &render_grid(&panels, 3, 380, 280),
            &mut written,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run, ScenarioConfig};

    fn tiny_report() -> RunReport {
        let dir = tempfile::tempdir().unwrap();
        let config = ScenarioConfig {
            n_lt: 4,
            n_lp: 4,
            n_mm: 1,
            n_ia: 1,
            t_close: 40.0,
            ..ScenarioConfig::preset("small-univariate").unwrap()
        };
        run(&config, dir.path()).unwrap()
    }

    #[test]
    fn emission_is_deterministic_and_complete() {
        let report = tiny_report();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files_a = emit_report(&report, a.path()).unwrap();
        let files_b = emit_report(&report, b.path()).unwrap();
        assert_eq!(files_a.len(), files_b.len());
        for (fa, fb) in files_a.iter().zip(&files_b) {
            assert_eq!(
                std::fs::read(fa).unwrap(),
                std::fs::read(fb).unwrap(),
                "{fa:?} differs"
            );
        }
        let names: Vec<String> = files_a
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in
            ["prices_0.csv", "volume_0.csv", "facts_0.csv", "market_0.svg", "panels_0.svg",
             "summary.txt"]
        {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
    }

    #[test]
    fn price_csv_round_trips() {
        let csv = price_series_csv(2, &[(0.0, 100.0), (3.0, 100.5)]);
        assert_eq!(csv.lines().count(), 3); // header + 2 rows
        let parsed = parse_price_series(&csv).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].0, 2);
        assert_eq!(parsed[0].1, vec![(0.0, 100.0), (3.0, 100.5)]);
    }

    #[test]
    fn six_panels_ship_per_asset() {
        let mids: Vec<f64> =
            (0..3000).map(|i| 100.0 + ((i * 37) % 13) as f64 * 0.01).collect();
        let panels = fact_panels(0, &mids);
        assert_eq!(panels.len(), 6);
        let svg = render_grid(&panels, 3, 380, 280);
        assert_eq!(svg.matches("<g transform=").count(), 6);
    }

    #[test]
    fn csv_detail_fields_are_quoted() {
        let report = tiny_report();
        let csv = facts_csv(&report.facts[0]);
        // Inconclusive or not, the sheet has one row per fact plus header.
        assert!(csv.lines().count() >= 6);
        for line in csv.lines().skip(1) {
            // A quoted detail keeps commas inside quotes; crude check: the
            // line splits into at least 4 fields outside quotes.
            let mut in_quotes = false;
            let fields = line
                .chars()
                .filter(|&c| {
                    if c == '"' {
                        in_quotes = !in_quotes;
                    }
                    c == ',' && !in_quotes
                })
                .count();
            assert!(fields >= 3, "{line}");
        }
    }
}
