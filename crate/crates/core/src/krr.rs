//! Kernel ridge regression and the regularization schedules used to pick ridge levels.
//!
//! The fitting objective is the mean squared error over the sample plus
//! `lambda * ||f||_K^2`; by the representer theorem its minimizer has
//! coefficients solving `(K + n * lambda * I) beta = y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_self, KernelConfig, RepresenterFunction};
use crate::matrix::{Dataset, Matrix};
use crate::model::Predictor;
use crate::par::Execution;
use crate::solve::solve_shifted;

/// Lower bound applied to the plug-in similarity in [`schedule_lambda_debias`].
pub const H_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct KrrModel {
    pub function: RepresenterFunction,
    /// Ridge level `lambda`. Infinite for the zero function.
    pub ridge: f64,
    pub sample_size: usize,
}

impl KrrModel {
    /// The zero function on the given anchors, i.e. the infinite-ridge limit.
    pub fn zero(anchors: Matrix, kernel: KernelConfig) -> Self {
        let sample_size = anchors.rows();
        Self { function: RepresenterFunction::zero(anchors, kernel), ridge: f64::INFINITY, sample_size }
    }

    pub fn coefficients(&self) -> &[f64] {
        self.function.coefficients()
    }

    pub fn anchors(&self) -> &Matrix {
        self.function.anchors()
    }

    pub fn predict_with(&self, x: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        self.function.eval_many_with(x, exec)
    }
}

impl Predictor for KrrModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.function.eval_many(x)
    }
}

pub fn fit_krr(data: &Dataset, lambda: f64, cfg: &KernelConfig) -> Result<KrrModel> {
    fit_krr_with(data, lambda, cfg, Execution::default())
}

pub fn fit_krr_with(data: &Dataset, lambda: f64, cfg: &KernelConfig, exec: Execution) -> Result<KrrModel> {
    if data.is_empty() {
        return Err(Error::invalid("cannot fit kernel ridge regression on an empty sample"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge must be positive and finite, got {lambda}")));
    }
    cfg.validate()?;
    let n = data.n();
    let gram = gram_self(cfg, &data.x, exec);
    let beta = solve_shifted(&gram, n as f64 * lambda, &data.y)?;
    Ok(KrrModel {
        function: RepresenterFunction::new(data.x.clone(), beta, *cfg)?,
        ridge: lambda,
        sample_size: n,
    })
}

/// Constants of the polynomial ridge schedules. `r` is the source-condition
/// smoothness and `alpha` the capacity exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSchedule {
    pub r: f64,
    pub alpha: f64,
    pub scale: f64,
    /// Constant of the debias schedule; `None` reuses `scale`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub debias_scale: Option<f64>,
    /// Constant of the ridge used for contrast-norm estimation; `None` reuses `scale`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_scale: Option<f64>,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self { r: 1.0, alpha: 1.0, scale: 1.0, debias_scale: None, contrast_scale: None }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.r) {
            return Err(Error::invalid(format!("r must lie in [1/2, 1], got {}", self.r)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.scale)));
        }
        for (name, v) in [("debias_scale", self.debias_scale), ("contrast_scale", self.contrast_scale)] {
            if let Some(d) = v {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::invalid(format!("{name} must be positive, got {d}")));
                }
            }
        }
        Ok(())
    }
}

/// `scale * n^(-1 / (2r + alpha))`: ridge for a KRR fit on `n` points, also
/// used for the pooled step with `n = n_sources + n_target`.
pub fn schedule_lambda_source(n: usize, s: &LambdaSchedule) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size for the ridge schedule must be at least 1"));
    }
    s.validate()?;
    Ok(s.scale * (n as f64).powf(-1.0 / (2.0 * s.r + s.alpha)))
}

/// Same rate as [`schedule_lambda_source`] with `contrast_scale` as the constant:
/// ridge for the per-study fits whose RKHS distances rank the sources.
pub fn schedule_lambda_contrast(n: usize, s: &LambdaSchedule) -> Result<f64> {
    let base = LambdaSchedule { scale: s.contrast_scale.unwrap_or(s.scale), ..*s };
    schedule_lambda_source(n, &base)
}

/// `debias_scale * max(h, H_FLOOR)^(-2 / (1 + alpha)) * n0^(-1 / (1 + alpha))`: ridge
/// for the debiasing step given a similarity level `h_hat`.
pub fn schedule_lambda_debias(n0: usize, h_hat: f64, s: &LambdaSchedule) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::invalid("target size for the debias schedule must be at least 1"));
    }
    if h_hat.is_nan() || h_hat < 0.0 {
        return Err(Error::invalid(format!("similarity level must be nonnegative, got {h_hat}")));
    }
    s.validate()?;
    let h = h_hat.max(H_FLOOR);
    let c = s.debias_scale.unwrap_or(s.scale);
    Ok(c * h.powf(-2.0 / (1.0 + s.alpha)) * (n0 as f64).powf(-1.0 / (1.0 + s.alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram_matrix;

    fn stationarity_residual(model: &KrrModel, data: &Dataset) -> f64 {
        let k = gram_matrix(model.function.kernel(), &data.x, &data.x).unwrap();
        let beta = model.coefficients();
        let kb = k.mul_vec(beta).unwrap();
        let shift = data.n() as f64 * model.ridge;
        kb.iter().zip(beta).zip(&data.y).map(|((a, b), y)| (a + shift * b - y).abs()).fold(0.0, f64::max)
    }

    fn toy(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.731).fract()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin() + 0.1 * x).collect();
        Dataset::new(Matrix::column(&xs), ys).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        let data = Dataset::new(Matrix::column(&[0.0]), vec![2.0]).unwrap();
        let m = fit_krr(&data, 0.5, &KernelConfig::default()).unwrap();
        assert!((m.coefficients()[0] - 4.0 / 3.0).abs() < 1e-14);
        let p = m.predict(&Matrix::column(&[0.0])).unwrap();
        assert!((p[0] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_fixture() {
        let data = Dataset::new(Matrix::column(&[0.0, 1.0]), vec![1.0, 0.0]).unwrap();
        let m = fit_krr(&data, 0.5, &KernelConfig::default()).unwrap();
        assert!((m.coefficients()[0] - 0.51752).abs() < 1e-4);
        assert!((m.coefficients()[1] + 0.09521).abs() < 1e-4);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let data = toy(30);
        let m = fit_krr(&data, 1e6, &KernelConfig::default()).unwrap();
        assert!(m.function.norm_squared().sqrt() < 1e-5);
        let p = m.predict(&Matrix::column(&[0.1, 0.5, 0.9])).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn stationarity_over_a_lambda_grid() {
        let data = toy(60);
        let ymax = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for &lam in &[1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0] {
            let m = fit_krr(&data, lam, &KernelConfig::default()).unwrap();
            assert!(stationarity_residual(&m, &data) <= 1e-8 * (1.0 + ymax), "lambda {lam}");
        }
    }

    #[test]
    fn rkhs_norm_decreases_with_ridge() {
        let data = toy(50);
        let mut last = f64::INFINITY;
        for &lam in &[1e-5, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let m = fit_krr(&data, lam, &KernelConfig::default()).unwrap();
            let nrm = m.function.norm_squared();
            assert!(nrm <= last * (1.0 + 1e-9), "lambda {lam}: {nrm} > {last}");
            last = nrm;
        }
    }

    #[test]
    fn interpolates_well_separated_points() {
        let xs = [0.0, 1.5, 3.0, 4.5, 6.0];
        let ys = [1.0, -2.0, 0.5, 3.0, -1.0];
        let data = Dataset::new(Matrix::column(&xs), ys.to_vec()).unwrap();
        let m = fit_krr(&data, 1e-10, &KernelConfig::default()).unwrap();
        let p = m.predict(&data.x).unwrap();
        for (a, b) in p.iter().zip(ys) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let data = toy(80);
        let k = KernelConfig::default();
        let a = fit_krr_with(&data, 0.01, &k, Execution::Sequential).unwrap();
        let b = fit_krr_with(&data, 0.01, &k, Execution::Parallel).unwrap();
        let c = fit_krr(&data, 0.01, &k).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        assert_eq!(a.coefficients(), c.coefficients());
    }

    #[test]
    fn fit_errors() {
        let k = KernelConfig::default();
        assert!(fit_krr(&Dataset::empty(1), 0.1, &k).is_err());
        assert!(fit_krr(&toy(3), 0.0, &k).is_err());
        assert!(fit_krr(&toy(3), -1.0, &k).is_err());
        let m = fit_krr(&toy(3), 0.1, &k).unwrap();
        assert!(m.predict(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn prediction_is_gram_times_coefficients() {
        let data = toy(12);
        let k = KernelConfig::default();
        let m = fit_krr(&data, 0.05, &k).unwrap();
        let x = Matrix::column(&[0.05, 0.33, 0.9, 1.4]);
        let g = gram_matrix(&k, &x, m.anchors()).unwrap();
        let expected = g.mul_vec(m.coefficients()).unwrap();
        let got = m.predict(&x).unwrap();
        for (a, b) in got.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn schedules() {
        let s = LambdaSchedule::default();
        assert_eq!(schedule_lambda_source(1, &s).unwrap(), 1.0);
        let odd =
            LambdaSchedule { r: 0.75, alpha: 0.5, scale: 2.5, debias_scale: None, contrast_scale: None };
        assert_eq!(schedule_lambda_source(1, &odd).unwrap(), 2.5);
        assert!((schedule_lambda_source(1000, &s).unwrap() - 0.1).abs() < 1e-12);
        assert!(schedule_lambda_source(0, &s).is_err());
        assert!(schedule_lambda_source(2000, &s).unwrap() < schedule_lambda_source(1000, &s).unwrap());

        assert!((schedule_lambda_debias(100, 1.0, &s).unwrap() - 0.1).abs() < 1e-12);
        let floored = schedule_lambda_debias(100, 0.0, &s).unwrap();
        assert!(floored.is_finite() && floored > 0.0);
        assert_eq!(floored, schedule_lambda_debias(100, H_FLOOR, &s).unwrap());
        assert!(
            schedule_lambda_debias(100, 0.5, &s).unwrap() > schedule_lambda_debias(100, 0.6, &s).unwrap()
        );
        assert!(schedule_lambda_debias(0, 1.0, &s).is_err());
        let split = LambdaSchedule { debias_scale: Some(3.0), ..s };
        assert!((schedule_lambda_debias(100, 1.0, &split).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(schedule_lambda_source(1, &split).unwrap(), 1.0);
    }

    #[test]
    fn schedule_validation() {
        let bad = [
            LambdaSchedule { r: 0.4, ..Default::default() },
            LambdaSchedule { alpha: 0.0, ..Default::default() },
            LambdaSchedule { scale: -1.0, ..Default::default() },
            LambdaSchedule { debias_scale: Some(0.0), ..Default::default() },
        ];
        for s in bad {
            assert!(schedule_lambda_source(10, &s).is_err());
        }
    }
}
