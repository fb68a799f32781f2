use crate::error::{Error, Result};
use crate::matrix::{Dataset, Matrix};

/// Anything that maps a covariate matrix to one prediction per row.
pub trait Predictor {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (**self).predict(x)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (**self).predict(x)
    }
}

/// Mean of `(a_i - b_i)^2`.
pub fn mean_squared_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("mean squared difference of empty vectors"));
    }
    let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(s / a.len() as f64)
}

/// Empirical squared-error risk of `f` on `data`.
pub fn empirical_risk<P: Predictor + ?Sized>(f: &P, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empirical risk on an empty sample"));
    }
    let pred = f.predict(&data.x)?;
    mean_squared_diff(&data.y, &pred)
}
