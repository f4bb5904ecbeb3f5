//! Online estimators used by the adaptive market maker.
//!
//! [`RlsEstimator`] is a recursive least-squares regression with an
//! inverse-covariance state that starts at `p0 * I`; with a large `p0` it
//! converges to the ordinary least-squares solution of everything it has
//! seen. [`OnlineMoments`] tracks mean and population variance in one pass
//! and merges across partitions without revisiting data.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("estimator has seen no data")]
    Empty,
}

/// Default inverse-covariance scale: effectively uninformative prior.
pub const DEFAULT_P0: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct RlsEstimator {
    coef: DVector<f64>,
    p: DMatrix<f64>,
    observations: u64,
}

impl RlsEstimator {
    pub fn new(dim: usize, p0: f64) -> RlsEstimator {
        assert!(dim > 0 && p0 > 0.0);
        RlsEstimator {
            coef: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * p0,
            observations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coef
    }

    /// Folds one `(row, y)` observation into the estimate.
    pub fn update(&mut self, row: &[f64], y: f64) -> Result<(), EstimatorError> {
        self.check_row(row)?;
        if !y.is_finite() {
            return Err(EstimatorError::NonFinite);
        }
        let r = DVector::from_column_slice(row);
        let pr = &self.p * &r;
        let denom = 1.0 + r.dot(&pr);
        let gain = pr / denom;
        let err = y - r.dot(&self.coef);
        self.coef += &gain * err;
        self.p -= &gain * (r.transpose() * &self.p);
        // The update is symmetric in exact arithmetic; in floats it drifts,
        // so re-symmetrize to keep the state well conditioned.
        let pt = self.p.transpose();
        self.p = (&self.p + pt) * 0.5;
        self.observations += 1;
        Ok(())
    }

    /// Predicted response for a feature row.
    pub fn predict(&self, row: &[f64]) -> Result<f64, EstimatorError> {
        self.check_row(row)?;
        Ok(row.iter().zip(self.coef.iter()).map(|(a, b)| a * b).sum())
    }

    fn check_row(&self, row: &[f64]) -> Result<(), EstimatorError> {
        if row.len() != self.coef.len() {
            return Err(EstimatorError::Dimension { expected: self.coef.len(), got: row.len() });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        Ok(())
    }
}

/// Single-pass mean and population variance, mergeable across partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OnlineMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl OnlineMoments {
    pub fn new() -> OnlineMoments {
        OnlineMoments::default()
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Result<f64, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::Empty);
        }
        Ok(self.mean)
    }

    /// Population variance (`m2 / count`).
    pub fn variance(&self) -> Result<f64, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::Empty);
        }
        Ok(self.m2 / self.count as f64)
    }

    /// Combines two partitions as if their samples were seen in one stream.
    pub fn merge(&self, other: &OnlineMoments) -> OnlineMoments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let delta = other.mean - self.mean;
        OnlineMoments {
            count: self.count + other.count,
            mean: self.mean + delta * n2 / n,
            m2: self.m2 + other.m2 + delta * delta * n1 * n2 / n,
        }
    }
}

/// Realized volatility: population standard deviation of one-step log
/// returns of the series. Needs at least two points.
pub fn realized_volatility(mids: &[f64]) -> Result<f64, EstimatorError> {
    if mids.len() < 2 {
        return Err(EstimatorError::Empty);
    }
    if mids.iter().any(|&m| !m.is_finite() || m <= 0.0) {
        return Err(EstimatorError::NonFinite);
    }
    let mut moments = OnlineMoments::new();
    for w in mids.windows(2) {
        moments.update((w[1] / w[0]).ln());
    }
    Ok(moments.variance()?.sqrt())
}

/// Volatility proxy for one quoting step: return volatility scaled by the
/// square root of the absolute mid move. The absolute value keeps the
/// proxy real when the mid moved down.
pub fn ia_sigma(sigma_returns: f64, delta_mid: f64) -> f64 {
    sigma_returns * delta_mid.abs().sqrt()
}

/// Regressor row for the fill-volume model: `[1, p_mid, s_ref, eps]`.
pub fn feature_row_nu(p_mid: f64, s_ref: f64, eps: f64) -> [f64; 4] {
    [1.0, p_mid, s_ref, eps]
}

/// Regressor row for the spread-capture model: adds `eps^2` and `eps^3`.
pub fn feature_row_s(p_mid: f64, s_ref: f64, eps: f64) -> [f64; 6] {
    [1.0, p_mid, s_ref, eps, eps * eps, eps * eps * eps]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rls_converges_to_mean_in_one_dim() {
        let mut rls = RlsEstimator::new(1, DEFAULT_P0);
        rls.update(&[1.0], 2.0).unwrap();
        rls.update(&[1.0], 4.0).unwrap();
        assert!((rls.coefficients()[0] - 3.0).abs() < 1e-4);
        assert_eq!(rls.observations(), 2);
    }

    #[test]
    fn rls_zero_targets_keep_zero_coefficients() {
        let mut rls = RlsEstimator::new(3, DEFAULT_P0);
        for i in 0..50 {
            let row = [1.0, i as f64, (i * i) as f64];
            rls.update(&row, 0.0).unwrap();
        }
        assert!(rls.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rls_rejects_bad_input() {
        let mut rls = RlsEstimator::new(2, DEFAULT_P0);
        assert_eq!(
            rls.update(&[1.0], 1.0),
            Err(EstimatorError::Dimension { expected: 2, got: 1 })
        );
        assert_eq!(rls.update(&[1.0, f64::NAN], 1.0), Err(EstimatorError::NonFinite));
        assert_eq!(rls.update(&[1.0, 1.0], f64::INFINITY), Err(EstimatorError::NonFinite));
        assert_eq!(rls.predict(&[1.0]).unwrap_err(), EstimatorError::Dimension { expected: 2, got: 1 });
    }

    #[test]
    fn moments_match_hand_computation() {
        let mut m = OnlineMoments::new();
        for x in [1.0, 2.0, 3.0] {
            m.update(x);
        }
        assert_relative_eq!(m.mean().unwrap(), 2.0);
        assert_relative_eq!(m.variance().unwrap(), 2.0 / 3.0);
        assert_eq!(OnlineMoments::new().variance(), Err(EstimatorError::Empty));
        let mut one = OnlineMoments::new();
        one.update(5.0);
        assert_eq!(one.variance().unwrap(), 0.0);
    }

    #[test]
    fn merged_moments_equal_single_stream() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let mut whole = OnlineMoments::new();
        for &x in &xs {
            whole.update(x);
        }
        let mut a = OnlineMoments::new();
        let mut b = OnlineMoments::new();
        for &x in &xs[..37] {
            a.update(x);
        }
        for &x in &xs[37..] {
            b.update(x);
        }
        let merged = a.merge(&b);
        assert_eq!(merged.count(), 100);
        assert_relative_eq!(merged.mean().unwrap(), whole.mean().unwrap(), epsilon = 1e-12);
        assert_relative_eq!(merged.variance().unwrap(), whole.variance().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn realized_volatility_on_symmetric_path() {
        let p0 = 100.0;
        let p1 = 100.0 * (0.01f64).exp();
        // Log returns are +0.01 then -0.01: mean 0, population std 0.01.
        let sigma = realized_volatility(&[p0, p1, p0]).unwrap();
        assert_relative_eq!(sigma, 0.01, epsilon = 1e-12);
        assert_eq!(realized_volatility(&[100.0]), Err(EstimatorError::Empty));
        assert_eq!(realized_volatility(&[100.0, -1.0]), Err(EstimatorError::NonFinite));
        assert_eq!(realized_volatility(&[100.0, 100.0, 100.0]).unwrap(), 0.0);
    }

    #[test]
    fn ia_sigma_uses_absolute_move() {
        assert_relative_eq!(ia_sigma(0.01, -0.04), 0.002, epsilon = 1e-15);
        assert_relative_eq!(ia_sigma(0.01, 0.04), 0.002, epsilon = 1e-15);
        assert_eq!(ia_sigma(0.5, 0.0), 0.0);
    }

    #[test]
    fn feature_rows_have_documented_shape() {
        assert_eq!(feature_row_nu(100.0, 0.5, 0.2), [1.0, 100.0, 0.5, 0.2]);
        let s = feature_row_s(100.0, 0.5, 0.2);
        assert_eq!(&s[..4], &[1.0, 100.0, 0.5, 0.2]);
        assert_relative_eq!(s[4], 0.04, epsilon = 1e-15);
        assert_relative_eq!(s[5], 0.008, epsilon = 1e-15);
    }
}
