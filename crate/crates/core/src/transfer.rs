//! Two-step transfer with a known transferable source set.
//!
//! The transferring step fits one KRR model on the target pooled with the
//! transferable sources. The debiasing step fits KRR to the target residuals
//! of that pooled fit. The estimator is the sum of the two.

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::krr::{fit_krr_with, KrrModel};
use crate::matrix::{Dataset, Matrix};
use crate::model::Predictor;
use crate::par::Execution;

/// Source samples plus the (0-based, ordered) indices treated as transferable.
#[derive(Clone, Copy, Debug)]
pub struct SourceCollection<'a> {
    sources: &'a [Dataset],
    transferable: &'a [usize],
}

impl<'a> SourceCollection<'a> {
    pub fn new(sources: &'a [Dataset], transferable: &'a [usize]) -> Result<Self> {
        let m = sources.len();
        let mut seen = vec![false; m];
        for &k in transferable {
            if k >= m {
                return Err(Error::invalid(format!("transferable index {k} out of range for {m} sources")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::invalid(format!("transferable index {k} listed twice")));
            }
        }
        Ok(Self { sources, transferable })
    }

    pub fn none(sources: &'a [Dataset]) -> Self {
        Self { sources, transferable: &[] }
    }

    pub fn sources(&self) -> &'a [Dataset] {
        self.sources
    }

    pub fn transferable(&self) -> &'a [usize] {
        self.transferable
    }

    /// Total sample size of the transferable sources.
    pub fn transferable_size(&self) -> usize {
        self.transferable.iter().map(|&k| self.sources[k].n()).sum()
    }

    /// Target rows followed by the transferable sources in listed order.
    pub fn pooled_with(&self, target: &Dataset) -> Result<Dataset> {
        let mut parts = Vec::with_capacity(self.transferable.len() + 1);
        parts.push(target);
        parts.extend(self.transferable.iter().map(|&k| &self.sources[k]));
        Dataset::concat(&parts)
    }
}

/// `f = pooled + debias`.
#[derive(Clone, Debug)]
pub struct TransferModel {
    pub pooled: KrrModel,
    pub debias: KrrModel,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl TransferModel {
    pub fn predict_with(&self, x: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        let mut p = self.pooled.predict_with(x, exec)?;
        let d = self.debias.predict_with(x, exec)?;
        for (a, b) in p.iter_mut().zip(d) {
            *a += b;
        }
        Ok(p)
    }
}

impl Predictor for TransferModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_with(x, Execution::default())
    }
}

pub fn fit_pooled(
    target: &Dataset,
    sources: &SourceCollection<'_>,
    lambda1: f64,
    cfg: &KernelConfig,
) -> Result<KrrModel> {
    fit_pooled_with(target, sources, lambda1, cfg, Execution::default())
}

pub fn fit_pooled_with(
    target: &Dataset,
    sources: &SourceCollection<'_>,
    lambda1: f64,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<KrrModel> {
    if target.is_empty() {
        return Err(Error::invalid("target sample is empty"));
    }
    if sources.transferable.is_empty() {
        return fit_krr_with(target, lambda1, cfg, exec);
    }
    let pooled = sources.pooled_with(target)?;
    fit_krr_with(&pooled, lambda1, cfg, exec)
}

/// Target residuals `y - pooled(x)`.
pub fn debias_residuals(target: &Dataset, pooled: &KrrModel) -> Result<Vec<f64>> {
    let fitted = pooled.predict(&target.x)?;
    Ok(target.y.iter().zip(fitted).map(|(y, f)| y - f).collect())
}

pub fn fit_debias(target: &Dataset, pooled: &KrrModel, lambda2: f64, cfg: &KernelConfig) -> Result<KrrModel> {
    fit_debias_with(target, pooled, lambda2, cfg, Execution::default())
}

pub fn fit_debias_with(
    target: &Dataset,
    pooled: &KrrModel,
    lambda2: f64,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<KrrModel> {
    if target.is_empty() {
        return Err(Error::invalid("target sample is empty"));
    }
    let fitted = pooled.predict_with(&target.x, exec)?;
    let w = target.y.iter().zip(fitted).map(|(y, f)| y - f).collect();
    let residuals = Dataset::new(target.x.clone(), w)?;
    fit_krr_with(&residuals, lambda2, cfg, exec)
}

pub fn fit_ah_tkrr(
    target: &Dataset,
    sources: &SourceCollection<'_>,
    lambda1: f64,
    lambda2: f64,
    cfg: &KernelConfig,
) -> Result<TransferModel> {
    fit_ah_tkrr_with(target, sources, lambda1, lambda2, cfg, Execution::default())
}

pub fn fit_ah_tkrr_with(
    target: &Dataset,
    sources: &SourceCollection<'_>,
    lambda1: f64,
    lambda2: f64,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<TransferModel> {
    let pooled = fit_pooled_with(target, sources, lambda1, cfg, exec)?;
    let debias = fit_debias_with(target, &pooled, lambda2, cfg, exec)?;
    Ok(TransferModel { pooled, debias, lambda1, lambda2 })
}

/// Pooled step only; the debias part is the zero function on the target anchors.
pub fn fit_ah_tkrr_wd(
    target: &Dataset,
    sources: &SourceCollection<'_>,
    lambda1: f64,
    cfg: &KernelConfig,
) -> Result<TransferModel> {
    let pooled = fit_pooled(target, sources, lambda1, cfg)?;
    Ok(without_debias(pooled, target, cfg))
}

pub(crate) fn without_debias(pooled: KrrModel, target: &Dataset, cfg: &KernelConfig) -> TransferModel {
    let lambda1 = pooled.ridge;
    TransferModel { pooled, debias: KrrModel::zero(target.x.clone(), *cfg), lambda1, lambda2: f64::INFINITY }
}
