//! Estimator oracles: recursive least squares against a batch SVD solve,
//! and online moments against the plain two-pass computation.

use cdasim::estimators::{OnlineMoments, RlsEstimator, DEFAULT_P0};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Batch ordinary least squares via SVD — no recursion, no shared code
/// with the production estimator.
fn ols_svd(rows: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(ys);
    let beta = x.svd(true, true).solve(&y, 1e-12).expect("full-rank design");
    beta.iter().copied().collect()
}

fn random_dataset(
    rng: &mut ChaCha12Rng,
    m: usize,
    d: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut rows = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for _ in 0..m {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let clean: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let noise: f64 = rng.gen_range(-0.05..0.05);
        ys.push(clean + noise);
        rows.push(row);
    }
    (rows, ys)
}

#[test]
fn rls_matches_batch_ols_on_a_thousand_datasets() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let m = 200;
    for case in 0..1_000 {
        let d = if case % 2 == 0 { 4 } else { 6 };
        let (rows, ys) = random_dataset(&mut rng, m, d);

        let mut rls = RlsEstimator::new(d, DEFAULT_P0);
        for (row, &y) in rows.iter().zip(&ys) {
            rls.update(row, y).unwrap();
        }
        let batch = ols_svd(&rows, &ys);

        let diff: f64 = rls
            .coefficients()
            .iter()
            .zip(&batch)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = batch.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(
            diff <= 1e-6 * scale,
            "case {case} (d={d}): relative gap {:.3e}",
            diff / scale
        );
    }
    let elapsed = start.elapsed();
    println!("rls vs ols: 1,000 datasets in {elapsed:.2?}");
    assert!(elapsed.as_secs() < 5, "criterion requires < 5s, took {elapsed:.2?}");
}

fn two_pass_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

#[test]
fn online_variance_matches_two_pass_on_long_streams() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let n = 100_000;
    let mut streams: Vec<(&str, Vec<f64>)> = Vec::new();
    streams.push(("uniform", (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    streams.push((
        "large offset",
        (0..n).map(|_| 1.0e6 + rng.gen_range(-1.0..1.0)).collect(),
    ));
    streams.push((
        "sinusoid",
        (0..n).map(|i| (i as f64 * 0.01).sin() * 3.0).collect(),
    ));
    let mut walk = 0.0;
    streams.push((
        "random walk",
        (0..n)
            .map(|_| {
                walk += rng.gen_range(-0.01..0.01);
                walk
            })
            .collect(),
    ));
    streams.push((
        "heavy tailed",
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(0.001..1.0);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign / u.sqrt()
            })
            .collect(),
    ));

    for (label, xs) in &streams {
        let mut online = OnlineMoments::new();
        for &x in xs {
            online.update(x);
        }
        let reference = two_pass_variance(xs);
        let got = online.variance().unwrap();
        assert!(
            (got - reference).abs() <= 1e-10 * reference.abs().max(f64::MIN_POSITIVE),
            "{label}: online {got:.15e} vs two-pass {reference:.15e}"
        );

        // Split/merge agrees with the single stream to the same tolerance.
        let (head, tail) = xs.split_at(xs.len() / 3);
        let mut a = OnlineMoments::new();
        let mut b = OnlineMoments::new();
        head.iter().for_each(|&x| a.update(x));
        tail.iter().for_each(|&x| b.update(x));
        let merged = a.merge(&b).variance().unwrap();
        assert!(
            (merged - reference).abs() <= 1e-10 * reference.abs(),
            "{label} merged: {merged:.15e} vs {reference:.15e}"
        );
    }
}
