//! Stylized-facts statistics over mid-price series.
//!
//! Pure functions: log returns at a sampling stride, autocorrelation with a
//! 95% random-walk confidence band, excess kurtosis, autocorrelation of
//! nonlinear return transforms, and first-passage times of cumulative
//! returns. [`validate_run`] bundles them into the per-run verdict sheet:
//!
//! (a) heavy-tailed returns   — excess kurtosis above threshold
//! (b) no raw autocorrelation — return acf inside the band at almost all lags
//! (c) volatility clustering  — |r| acf above the band at most short lags
//! (d) nonlinear dependence   — same criterion, reported with the full suite
//! (e) first-passage times    — descriptive only
//! (f) aggregational normality— kurtosis falls as the stride grows

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series too short: need {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("non-positive or non-finite price at index {0}")]
    BadPrice(usize),
}

/// Calendar-time view of an event-time series: the prevailing value at each
/// whole tick from the first recorded point through `t_close`. Quiet ticks
/// carry the last value forward, so downstream returns are per-tick.
pub fn per_tick_sample(points: &[(f64, f64)], t_close: f64) -> Vec<(f64, f64)> {
    let Some(&(t0, _)) = points.first() else { return Vec::new() };
    let mut out = Vec::new();
    let mut i = 0;
    for t in (t0.ceil() as u64)..=(t_close.floor() as u64) {
        while i + 1 < points.len() && points[i + 1].0 <= t as f64 {
            i += 1;
        }
        out.push((t as f64, points[i].1));
    }
    out
}

/// Log returns of `prices` sampled every `stride` ticks.
pub fn log_returns(prices: &[f64], stride: usize) -> Result<Vec<f64>, StatsError> {
    assert!(stride >= 1);
    if prices.len() <= stride {
        return Err(StatsError::TooShort { need: stride + 1, got: prices.len() });
    }
    if let Some(bad) = prices.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(StatsError::BadPrice(bad));
    }
    let sampled: Vec<f64> = prices.iter().copied().step_by(stride).collect();
    Ok(sampled.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

fn population_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Sample autocorrelation at lags `1..=max_lag` with the overall mean and
/// variance held fixed across lags, plus the 95% band `1.96/√n` for a
/// correlation-free series.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    correlations: Vec<f64>,
    pub ci_band: f64,
}

impl AcfResult {
    pub fn max_lag(&self) -> usize {
        self.correlations.len()
    }

    /// Correlation at `lag` ∈ 1..=max_lag.
    pub fn lag(&self, lag: usize) -> f64 {
        self.correlations[lag - 1]
    }

    pub fn lags(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.correlations.iter().enumerate().map(|(i, &c)| (i + 1, c))
    }

    /// Fraction of lags in `lo..=hi` whose correlation sits inside the band.
    pub fn fraction_inside(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.max_lag());
        let total = hi + 1 - lo;
        let inside =
            (lo..=hi).filter(|&k| self.lag(k).abs() <= self.ci_band).count();
        inside as f64 / total as f64
    }

    /// Fraction of lags in `lo..=hi` strictly above the upper band.
    pub fn fraction_above(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.max_lag());
        let total = hi + 1 - lo;
        let above = (lo..=hi).filter(|&k| self.lag(k) > self.ci_band).count();
        above as f64 / total as f64
    }
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult, StatsError> {
    let n = series.len();
    if n <= max_lag {
        return Err(StatsError::TooShort { need: max_lag + 1, got: n });
    }
    let (mean, var) = population_variance(series);
    if var <= 0.0 || !var.is_finite() {
        return Err(StatsError::ZeroVariance);
    }
    let denom = var * n as f64;
    let correlations = (1..=max_lag)
        .map(|k| {
            (k..n).map(|t| (series[t] - mean) * (series[t - k] - mean)).sum::<f64>() / denom
        })
        .collect();
    Ok(AcfResult { correlations, ci_band: 1.96 / (n as f64).sqrt() })
}

/// Population excess kurtosis `m₄/m₂² − 3`.
pub fn excess_kurtosis(series: &[f64]) -> Result<f64, StatsError> {
    if series.len() < 4 {
        return Err(StatsError::TooShort { need: 4, got: series.len() });
    }
    let (mean, m2) = population_variance(series);
    if m2 <= 0.0 || !m2.is_finite() {
        return Err(StatsError::ZeroVariance);
    }
    let n = series.len() as f64;
    let m4 = series.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Nonlinear functions of returns whose autocorrelation reveals volatility
/// clustering even when raw returns are uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnTransform {
    Abs,
    Square,
    AbsSquare,
    Cos,
    Log1pSquare,
}

impl ReturnTransform {
    pub const ALL: [ReturnTransform; 5] = [
        ReturnTransform::Abs,
        ReturnTransform::Square,
        ReturnTransform::AbsSquare,
        ReturnTransform::Cos,
        ReturnTransform::Log1pSquare,
    ];

    pub fn apply(self, r: f64) -> f64 {
        match self {
            ReturnTransform::Abs => r.abs(),
            ReturnTransform::Square => r * r,
            ReturnTransform::AbsSquare => (r * r).abs(),
            ReturnTransform::Cos => r.cos(),
            ReturnTransform::Log1pSquare => (r * r).ln_1p(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReturnTransform::Abs => "|r|",
            ReturnTransform::Square => "r^2",
            ReturnTransform::AbsSquare => "|r^2|",
            ReturnTransform::Cos => "cos(r)",
            ReturnTransform::Log1pSquare => "log(1+r^2)",
        }
    }
}

impl fmt::Display for ReturnTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Autocorrelation of each transform of the raw return series.
pub fn nonlinear_acf_suite(
    returns: &[f64],
    max_lag: usize,
) -> Result<Vec<(ReturnTransform, AcfResult)>, StatsError> {
    ReturnTransform::ALL
        .into_iter()
        .map(|tr| {
            let transformed: Vec<f64> = returns.iter().map(|&r| tr.apply(r)).collect();
            acf(&transformed, max_lag).map(|res| (tr, res))
        })
        .collect()
}

/// First-passage times: for every start index, the elapsed ticks until the
/// cumulative log return first crosses `+ρ` (gain) or `−ρ` (loss), with
/// `ρ = multiplier × std of the tick return series`. Starts that never
/// cross are censored.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstPassage {
    pub rho: f64,
    pub gains: Vec<u64>,
    pub losses: Vec<u64>,
    pub censored: usize,
}

pub fn first_passage_times(
    prices: &[f64],
    rho_multiplier: f64,
) -> Result<FirstPassage, StatsError> {
    let returns = log_returns(prices, 1)?;
    let (_, var) = population_variance(&returns);
    if var <= 0.0 || !var.is_finite() {
        return Err(StatsError::ZeroVariance);
    }
    let rho = rho_multiplier * var.sqrt();
    let mut out = FirstPassage { rho, gains: Vec::new(), losses: Vec::new(), censored: 0 };
    for start in 0..returns.len() {
        let mut cum = 0.0;
        let mut crossed = false;
        for (elapsed, r) in returns[start..].iter().enumerate() {
            cum += r;
            if cum >= rho {
                out.gains.push(elapsed as u64 + 1);
                crossed = true;
                break;
            }
            if cum <= -rho {
                out.losses.push(elapsed as u64 + 1);
                crossed = true;
                break;
            }
        }
        if !crossed {
            out.censored += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fact's verdict plus the measured statistic behind it.
#[derive(Debug, Clone)]
pub struct FactReport {
    pub verdict: Verdict,
    pub metric: f64,
    pub detail: String,
}

impl FactReport {
    fn inconclusive(detail: impl Into<String>) -> FactReport {
        FactReport { verdict: Verdict::Inconclusive, metric: f64::NAN, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FactThresholds {
    /// Minimum mid-price points for any verdict at all.
    pub min_points: usize,
    /// (a): excess kurtosis of tick returns must exceed this.
    pub heavy_tail_excess: f64,
    /// (b): fraction of return-acf lags inside the band, over this lag range.
    pub acf_inside_fraction: f64,
    pub acf_lags: (usize, usize),
    /// (c)/(d): fraction of |r|-acf lags above the band, over this range.
    pub clustering_fraction: f64,
    pub clustering_lags: (usize, usize),
    /// (f): compare tick kurtosis against this stride's kurtosis.
    pub coarse_stride: usize,
    /// (e): ρ multiplier on the return std.
    pub passage_multiplier: f64,
}

impl Default for FactThresholds {
    fn default() -> FactThresholds {
        FactThresholds {
            min_points: 2000,
            heavy_tail_excess: 0.5,
            acf_inside_fraction: 0.90,
            acf_lags: (2, 50),
            clustering_fraction: 0.60,
            clustering_lags: (1, 20),
            coarse_stride: 5,
            passage_multiplier: 5.0,
        }
    }
}

/// Descriptive summary of the first-passage distributions.
#[derive(Debug, Clone)]
pub struct PassageSummary {
    pub rho: f64,
    pub gain_count: usize,
    pub loss_count: usize,
    pub censored: usize,
    pub mean_gain: f64,
    pub mean_loss: f64,
}

/// Verdicts for facts (a)–(d) and (f) plus descriptive stats for (e).
#[derive(Debug, Clone)]
pub struct FactsReport {
    pub points: usize,
    pub heavy_tails: FactReport,
    pub no_autocorrelation: FactReport,
    pub volatility_clustering: FactReport,
    pub nonlinear_dependence: FactReport,
    pub aggregational_normality: FactReport,
    pub first_passage: Option<PassageSummary>,
}

impl FactsReport {
    pub fn facts(&self) -> [(&'static str, &FactReport); 5] {
        [
            ("heavy_tails", &self.heavy_tails),
            ("no_autocorrelation", &self.no_autocorrelation),
            ("volatility_clustering", &self.volatility_clustering),
            ("nonlinear_dependence", &self.nonlinear_dependence),
            ("aggregational_normality", &self.aggregational_normality),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.facts().iter().all(|(_, f)| f.verdict == Verdict::Pass)
    }

    pub fn inconclusive(&self) -> bool {
        self.facts().iter().all(|(_, f)| f.verdict == Verdict::Inconclusive)
    }
}

/// Run every fact check against a mid-price series.
pub fn validate_run(prices: &[f64], th: &FactThresholds) -> FactsReport {
    if prices.len() < th.min_points {
        let why = format!("need {} points, got {}", th.min_points, prices.len());
        return FactsReport {
            points: prices.len(),
            heavy_tails: FactReport::inconclusive(&why),
            no_autocorrelation: FactReport::inconclusive(&why),
            volatility_clustering: FactReport::inconclusive(&why),
            nonlinear_dependence: FactReport::inconclusive(&why),
            aggregational_normality: FactReport::inconclusive(&why),
            first_passage: None,
        };
    }

    let returns = log_returns(prices, 1);

    let heavy_tails = match returns.as_ref().map_err(Clone::clone).and_then(|r| {
        excess_kurtosis(r)
    }) {
        Ok(k) => FactReport {
            verdict: if k > th.heavy_tail_excess { Verdict::Pass } else { Verdict::Fail },
            metric: k,
            detail: format!("excess kurtosis {k:.3} vs > {}", th.heavy_tail_excess),
        },
        Err(e) => FactReport::inconclusive(e.to_string()),
    };

    let (lag_lo, lag_hi) = th.acf_lags;
    let no_autocorrelation = match returns.as_ref().map_err(Clone::clone).and_then(|r| {
        acf(r, lag_hi)
    }) {
        Ok(res) => {
            let frac = res.fraction_inside(lag_lo, lag_hi);
            FactReport {
                verdict: if frac >= th.acf_inside_fraction { Verdict::Pass } else { Verdict::Fail },
                metric: frac,
                detail: format!(
                    "{:.0}% of lags {lag_lo}..{lag_hi} inside ±{:.4}",
                    frac * 100.0,
                    res.ci_band
                ),
            }
        }
        Err(e) => FactReport::inconclusive(e.to_string()),
    };

    let (cl_lo, cl_hi) = th.clustering_lags;
    let clustering = returns.as_ref().map_err(Clone::clone).and_then(|r| {
        let abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
        acf(&abs, cl_hi)
    });
    let volatility_clustering = match &clustering {
        Ok(res) => {
            let frac = res.fraction_above(cl_lo, cl_hi);
            FactReport {
                verdict: if frac >= th.clustering_fraction { Verdict::Pass } else { Verdict::Fail },
                metric: frac,
                detail: format!(
                    "{:.0}% of |r| lags {cl_lo}..{cl_hi} above +{:.4}",
                    frac * 100.0,
                    res.ci_band
                ),
            }
        }
        Err(e) => FactReport::inconclusive(e.to_string()),
    };
    // (d) shares (c)'s criterion; the full transform suite is descriptive.
    let nonlinear_dependence = match &clustering {
        Ok(_) => {
            let mut parts = Vec::new();
            if let Ok(rs) = returns.as_ref() {
                if let Ok(suite) = nonlinear_acf_suite(rs, cl_hi) {
                    for (tr, res) in &suite {
                        parts.push(format!(
                            "{tr} {:.0}%",
                            res.fraction_above(cl_lo, cl_hi) * 100.0
                        ));
                    }
                }
            }
            FactReport {
                verdict: volatility_clustering.verdict,
                metric: volatility_clustering.metric,
                detail: format!("above-band fractions: {}", parts.join(", ")),
            }
        }
        Err(e) => FactReport::inconclusive(e.to_string()),
    };

    let aggregational_normality = {
        let fine = returns.as_ref().map_err(Clone::clone).and_then(|r| excess_kurtosis(r));
        let coarse =
            log_returns(prices, th.coarse_stride).and_then(|r| excess_kurtosis(&r));
        match (fine, coarse) {
            (Ok(k1), Ok(k5)) => FactReport {
                verdict: if k1 > k5 { Verdict::Pass } else { Verdict::Fail },
                metric: k1 - k5,
                detail: format!(
                    "excess kurtosis stride 1: {k1:.3}, stride {}: {k5:.3}",
                    th.coarse_stride
                ),
            },
            (Err(e), _) | (_, Err(e)) => FactReport::inconclusive(e.to_string()),
        }
    };

    let first_passage = first_passage_times(prices, th.passage_multiplier).ok().map(|fp| {
        let mean = |xs: &[u64]| {
            if xs.is_empty() {
                f64::NAN
            } else {
                xs.iter().sum::<u64>() as f64 / xs.len() as f64
            }
        };
        PassageSummary {
            rho: fp.rho,
            gain_count: fp.gains.len(),
            loss_count: fp.losses.len(),
            censored: fp.censored,
            mean_gain: mean(&fp.gains),
            mean_loss: mean(&fp.losses),
        }
    });

    FactsReport {
        points: prices.len(),
        heavy_tails,
        no_autocorrelation,
        volatility_clustering,
        nonlinear_dependence,
        aggregational_normality,
        first_passage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn returns_at_stride_one() {
        let r = log_returns(&[100.0, 110.0], 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r[0], (1.1f64).ln());
    }

    #[test]
    fn stride_subsamples_before_differencing() {
        let r = log_returns(&[100.0, 105.0, 110.0, 100.0, 90.0], 2).unwrap();
        let expect = log_returns(&[100.0, 110.0, 90.0], 1).unwrap();
        assert_eq!(r, expect);
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = log_returns(&[50.0; 10], 1).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bad_prices_are_rejected() {
        assert_eq!(log_returns(&[100.0, -1.0], 1), Err(StatsError::BadPrice(1)));
        assert_eq!(log_returns(&[100.0], 1), Err(StatsError::TooShort { need: 2, got: 1 }));
    }

    #[test]
    fn alternating_series_has_lag_one_near_minus_one() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let res = acf(&xs, 2).unwrap();
        assert!((res.lag(1) + 1.0).abs() < 2e-3, "{}", res.lag(1));
        assert!((res.lag(2) - 1.0).abs() < 4e-3, "{}", res.lag(2));
    }

    #[test]
    fn acf_is_scale_free() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * 7.0).collect();
        let a = acf(&xs, 10).unwrap();
        let b = acf(&scaled, 10).unwrap();
        for k in 1..=10 {
            assert_relative_eq!(a.lag(k), b.lag(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_variance_series_has_no_acf() {
        assert_eq!(acf(&[3.0; 100], 5), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn two_point_distribution_kurtosis() {
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_relative_eq!(excess_kurtosis(&xs).unwrap(), -2.0);
    }

    #[test]
    fn square_transforms_agree() {
        let r: Vec<f64> = (0..300).map(|i| ((i as f64) * 0.7).sin() * 0.01).collect();
        let suite = nonlinear_acf_suite(&r, 10).unwrap();
        let sq = &suite.iter().find(|(t, _)| *t == ReturnTransform::Square).unwrap().1;
        let abs_sq = &suite.iter().find(|(t, _)| *t == ReturnTransform::AbsSquare).unwrap().1;
        assert_eq!(sq, abs_sq);
    }

    #[test]
    fn monotone_path_first_passage() {
        // Exponential climb: each tick adds 0.01 to the cumulative log
        // return; σ of returns is 0 though — use a wiggle to give σ > 0.
        let mut prices = vec![100.0];
        let steps = [0.02, -0.005, 0.02, -0.005, 0.02, -0.005, 0.02, -0.005];
        for s in steps {
            let last = *prices.last().unwrap();
            prices.push(last * f64::exp(s));
        }
        let fp = first_passage_times(&prices, 2.0).unwrap();
        // From every start the path drifts up and eventually crosses +ρ.
        assert!(fp.losses.is_empty());
        assert!(!fp.gains.is_empty());
        assert!(fp.gains[0] >= 1);
    }

    #[test]
    fn antisymmetric_path_has_mirrored_passages() {
        // Log-price path that is exactly antisymmetric around zero.
        let wiggles = [0.01, 0.03, -0.02, 0.05, -0.01, 0.04, 0.02, -0.03, 0.06, 0.01];
        let up: Vec<f64> = {
            let mut cum = vec![0.0];
            for w in wiggles {
                cum.push(cum.last().unwrap() + w);
            }
            cum.iter().map(|c| f64::exp(*c)).collect()
        };
        let down: Vec<f64> = {
            let mut cum = vec![0.0];
            for w in wiggles {
                cum.push(cum.last().unwrap() - w);
            }
            cum.iter().map(|c| f64::exp(*c)).collect()
        };
        let a = first_passage_times(&up, 1.5).unwrap();
        let b = first_passage_times(&down, 1.5).unwrap();
        assert_eq!(a.gains, b.losses);
        assert_eq!(a.losses, b.gains);
        assert_eq!(a.censored, b.censored);
    }

    #[test]
    fn short_series_is_inconclusive() {
        let report = validate_run(&[100.0, 101.0, 102.0], &FactThresholds::default());
        assert!(report.inconclusive());
        assert!(report.first_passage.is_none());
    }

    #[test]
    fn constant_series_is_inconclusive() {
        let report = validate_run(&vec![100.0; 3000], &FactThresholds::default());
        assert!(report.inconclusive());
    }

}
