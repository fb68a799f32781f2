//! Transfer with unknown transferable sources by sparse aggregation.
//!
//! The target is split into `T1` and `T2`. On `T1` and on every source a plain
//! KRR fit is computed, and the sources are ranked by the RKHS distance of
//! their fit to the target fit. Candidate `l` is the two-step transfer
//! estimator using the `l` closest sources (candidate 0 is KRR on `T1`).
//! `T2` is split again into `T21` and `T22`: `T21` prunes the candidates to
//! those whose risk is within a margin of the best one, and `T22` picks the
//! best convex combination of at most two survivors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{rkhs_norm_diff_with, KernelConfig};
use crate::krr::{
    fit_krr_with, schedule_lambda_contrast, schedule_lambda_debias, schedule_lambda_source, KrrModel,
    LambdaSchedule,
};
use crate::matrix::{Dataset, Matrix};
use crate::model::{mean_squared_diff, Predictor};
use crate::par::Execution;
use crate::seed::{rng_for, streams};
use crate::transfer::{fit_ah_tkrr_with, SourceCollection, TransferModel};

/// Margin scale `phi` for the survivor set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Phi {
    /// `sqrt(ln(m + 2) / |T21|)` with `m` the number of sources.
    #[default]
    Auto,
    Value(f64),
}

impl Phi {
    pub fn resolve(&self, num_sources: usize, n_t21: usize) -> f64 {
        match *self {
            Phi::Auto => ((num_sources as f64 + 2.0).ln() / n_t21.max(1) as f64).sqrt(),
            Phi::Value(v) => v,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PhiRepr {
    Value(f64),
    Keyword(String),
}

impl Serialize for Phi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Phi::Auto => PhiRepr::Keyword("auto".into()),
            Phi::Value(v) => PhiRepr::Value(*v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Phi {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PhiRepr::deserialize(d)? {
            PhiRepr::Value(v) => Ok(Phi::Value(v)),
            PhiRepr::Keyword(k) if k == "auto" => Ok(Phi::Auto),
            PhiRepr::Keyword(k) => {
                Err(serde::de::Error::custom(format!("phi must be a positive number or \"auto\", got {k:?}")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationParams {
    pub c: f64,
    pub phi: Phi,
    pub split_seed: u64,
    /// Refit the two selected candidates on the full target.
    pub retrain: bool,
    /// Fraction of the target assigned to `T1`.
    pub t1_fraction: f64,
    /// Fraction of `T2` assigned to `T21`.
    pub t21_fraction: f64,
    /// Exponential-weight temperature; `None` means twice the sample variance of `y` on `T2`.
    pub aew_temperature: Option<f64>,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            phi: Phi::Auto,
            split_seed: 0,
            retrain: true,
            t1_fraction: 0.5,
            t21_fraction: 0.5,
            aew_temperature: None,
        }
    }
}

impl AggregationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("c must be positive, got {}", self.c)));
        }
        if let Phi::Value(v) = self.phi {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("phi must be positive, got {v}")));
            }
        }
        for (name, f) in [("t1_fraction", self.t1_fraction), ("t21_fraction", self.t21_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if let Some(t) = self.aew_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("aew_temperature must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Uniform random partition of the rows of `data`. The first part has
/// `round(fraction * n)` rows (clamped to `[1, n - 1]`); both parts keep the
/// original row order.
pub fn split_uniform(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split_on_stream(data, fraction, seed, streams::SPLIT)
}

/// The `(T21, T22)` partition of `t2` used by [`hyper_sparse_aggregate`].
pub fn split_t2(t2: &Dataset, params: &AggregationParams) -> Result<(Dataset, Dataset)> {
    split_on_stream(t2, params.t21_fraction, params.split_seed, streams::SPLIT_INNER)
}

pub(crate) fn split_on_stream(
    data: &Dataset,
    fraction: f64,
    seed: u64,
    stream: u64,
) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::invalid(format!("cannot split a sample of size {n}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (first, second) = partition_indices(n, k, seed, stream);
    Ok((data.select(&first), data.select(&second)))
}

/// Picks `k` of `0..n` uniformly without replacement (partial Fisher-Yates).
/// Returns (chosen, rest), each sorted ascending.
pub(crate) fn partition_indices(n: usize, k: usize, seed: u64, stream: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_for(seed, stream);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut rest = idx.split_off(k.min(n));
    idx.sort_unstable();
    rest.sort_unstable();
    (idx, rest)
}

/// 1-based ascending-norm ranks; ties go to the lower source index.
pub fn ranks_from_norms(norms: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; norms.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos + 1;
    }
    ranks
}

/// `sets[l] = { k : ranks[k] <= l }` for `l = 0..=m`, each sorted by source index.
pub fn nested_sets(ranks: &[usize]) -> Vec<Vec<usize>> {
    (0..=ranks.len()).map(|l| (0..ranks.len()).filter(|&k| ranks[k] <= l).collect()).collect()
}

#[derive(Clone, Debug)]
pub struct ContrastRanking {
    /// `||f_k - f_0||_K` for each source `k`.
    pub contrast_norms: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Plain KRR fit on `T1` with the contrast ridge.
    pub target_fit: KrrModel,
}

pub fn rank_contrasts(
    t1: &Dataset,
    sources: &[Dataset],
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
) -> Result<ContrastRanking> {
    rank_contrasts_with(t1, sources, schedule, cfg, Execution::default())
}

pub fn rank_contrasts_with(
    t1: &Dataset,
    sources: &[Dataset],
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<ContrastRanking> {
    if t1.is_empty() {
        return Err(Error::invalid("target split T1 is empty"));
    }
    for (k, s) in sources.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::invalid(format!("source {k} is empty")));
        }
        if s.dim() != t1.dim() {
            return Err(Error::invalid(format!(
                "source {k} has {} covariates, target has {}",
                s.dim(),
                t1.dim()
            )));
        }
    }
    let target_fit = fit_krr_with(t1, schedule_lambda_contrast(t1.n(), schedule)?, cfg, exec)?;
    let norms = exec.map(sources.len(), |k| -> Result<f64> {
        let lambda = schedule_lambda_contrast(sources[k].n(), schedule)?;
        let fk = fit_krr_with(&sources[k], lambda, cfg, Execution::Sequential)?;
        rkhs_norm_diff_with(&fk.function, &target_fit.function, Execution::Sequential)
    });
    let contrast_norms = norms.into_iter().collect::<Result<Vec<_>>>()?;
    let ranks = ranks_from_norms(&contrast_norms);
    Ok(ContrastRanking { contrast_norms, ranks, target_fit })
}

/// One entry of the candidate family.
#[derive(Clone, Debug)]
pub enum Candidate {
    Krr(KrrModel),
    Transfer(TransferModel),
}

impl Candidate {
    pub fn predict_with(&self, x: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        match self {
            Candidate::Krr(m) => m.predict_with(x, exec),
            Candidate::Transfer(m) => m.predict_with(x, exec),
        }
    }
}

impl Predictor for Candidate {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_with(x, Execution::default())
    }
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub contrast_norms: Vec<f64>,
    pub ranks: Vec<usize>,
    /// `nested_sets[l]` holds the `l` closest sources (0-based indices).
    pub nested_sets: Vec<Vec<usize>>,
    /// Plug-in similarity `h_l = max_{k in A_l} ||delta_k||`, 0 for the empty set.
    pub similarity: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

/// Plain KRR for an empty source set, otherwise the two-step transfer
/// estimator with ridges from the schedules and plug-in similarity `h`.
pub fn fit_candidate(
    target: &Dataset,
    sources: &[Dataset],
    set: &[usize],
    h: f64,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<Candidate> {
    if set.is_empty() {
        let lambda = schedule_lambda_source(target.n(), schedule)?;
        return Ok(Candidate::Krr(fit_krr_with(target, lambda, cfg, exec)?));
    }
    let collection = SourceCollection::new(sources, set)?;
    let lambda1 = schedule_lambda_source(collection.transferable_size() + target.n(), schedule)?;
    let lambda2 = schedule_lambda_debias(target.n(), h, schedule)?;
    let m = fit_ah_tkrr_with(target, &collection, lambda1, lambda2, cfg, exec)?;
    Ok(Candidate::Transfer(m))
}

pub fn build_candidates(
    t1: &Dataset,
    sources: &[Dataset],
    ranking: ContrastRanking,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
) -> Result<CandidateSet> {
    build_candidates_with(t1, sources, ranking, schedule, cfg, Execution::default())
}

pub fn build_candidates_with(
    t1: &Dataset,
    sources: &[Dataset],
    ranking: ContrastRanking,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<CandidateSet> {
    let m = sources.len();
    if ranking.ranks.len() != m || ranking.contrast_norms.len() != m {
        return Err(Error::invalid("ranking does not match the number of sources"));
    }
    let mut check = ranking.ranks.clone();
    check.sort_unstable();
    if check.iter().enumerate().any(|(i, &r)| r != i + 1) {
        return Err(Error::invalid("ranks are not a permutation of 1..=m"));
    }
    let sets = nested_sets(&ranking.ranks);
    let similarity: Vec<f64> =
        sets.iter().map(|s| s.iter().map(|&k| ranking.contrast_norms[k]).fold(0.0, f64::max)).collect();
    let fitted = exec.map(m, |i| {
        let l = i + 1;
        fit_candidate(t1, sources, &sets[l], similarity[l], schedule, cfg, Execution::Sequential)
    });
    let mut candidates = Vec::with_capacity(m + 1);
    let lambda0 = schedule_lambda_source(t1.n(), schedule)?;
    let first = if ranking.target_fit.ridge == lambda0 {
        ranking.target_fit
    } else {
        fit_krr_with(t1, lambda0, cfg, exec)?
    };
    candidates.push(Candidate::Krr(first));
    for c in fitted {
        candidates.push(c?);
    }
    Ok(CandidateSet {
        contrast_norms: ranking.contrast_norms,
        ranks: ranking.ranks,
        nested_sets: sets,
        similarity,
        candidates,
    })
}

/// Result of the two-stage hyper-sparse selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub idx_a: usize,
    pub idx_b: usize,
    /// Weight on `idx_a`; `1 - weight` goes to `idx_b`.
    pub weight: f64,
    /// `T22` risk of the selected combination.
    pub risk: f64,
    /// Index of the `T21` risk minimizer.
    pub best_t21: usize,
    /// Survivor set, ascending.
    pub survivors: Vec<usize>,
    pub t21_risks: Vec<f64>,
    pub t22_risks: Vec<f64>,
    pub phi: f64,
}

/// Closed-form minimizer over `t in [0, 1]` of the mean of
/// `(y - t a - (1 - t) b)^2`. Returns `(t, risk)`.
pub fn best_convex_weight(y: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((yi, ai), bi) in y.iter().zip(a).zip(b) {
        let d = ai - bi;
        num += (yi - bi) * d;
        den += d * d;
    }
    let t = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 1.0 };
    let risk = y
        .iter()
        .zip(a)
        .zip(b)
        .map(|((yi, ai), bi)| {
            let r = yi - t * ai - (1.0 - t) * bi;
            r * r
        })
        .sum::<f64>()
        / y.len() as f64;
    (t, risk)
}

pub fn hyper_sparse_aggregate<P: Predictor + Sync>(
    candidates: &[P],
    t2: &Dataset,
    params: &AggregationParams,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to aggregate"));
    }
    if t2.n() < 2 {
        return Err(Error::invalid(format!("T2 needs at least 2 rows, got {}", t2.n())));
    }
    params.validate()?;
    let (t21, t22) = split_t2(t2, params)?;
    let preds = candidates
        .iter()
        .map(|c| Ok((c.predict(&t21.x)?, c.predict(&t22.x)?)))
        .collect::<Result<Vec<_>>>()?;
    let t21_risks = preds.iter().map(|(p, _)| mean_squared_diff(&t21.y, p)).collect::<Result<Vec<_>>>()?;
    let t22_risks = preds.iter().map(|(_, p)| mean_squared_diff(&t22.y, p)).collect::<Result<Vec<_>>>()?;

    let best = (0..candidates.len())
        .min_by(|&a, &b| t21_risks[a].total_cmp(&t21_risks[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    let phi = params.phi.resolve(candidates.len() - 1, t21.n());
    let survivors: Vec<usize> = (0..candidates.len())
        .filter(|&l| {
            if l == best {
                return true;
            }
            let gap = mean_squared_diff(&preds[best].0, &preds[l].0).unwrap_or(f64::INFINITY).sqrt();
            t21_risks[l] <= t21_risks[best] + params.c * (phi * gap).max(phi * phi)
        })
        .collect();

    let mut selection = Selection {
        idx_a: best,
        idx_b: best,
        weight: 1.0,
        risk: t22_risks[best],
        best_t21: best,
        survivors: survivors.clone(),
        t21_risks,
        t22_risks,
        phi,
    };
    if survivors.len() == 1 {
        return Ok(selection);
    }
    let mut best_risk = f64::INFINITY;
    for (i, &a) in survivors.iter().enumerate() {
        for &b in &survivors[i + 1..] {
            let (t, risk) = best_convex_weight(&t22.y, &preds[a].1, &preds[b].1);
            if risk < best_risk {
                best_risk = risk;
                selection.idx_a = a;
                selection.idx_b = b;
                selection.weight = t;
                selection.risk = risk;
            }
        }
    }
    Ok(selection)
}

/// Exponential weights `w_l ∝ exp(-|t2| * risk_l / temperature)`.
pub fn aew_weights<P: Predictor>(candidates: &[P], t2: &Dataset, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to aggregate"));
    }
    if t2.is_empty() {
        return Err(Error::invalid("aggregation sample is empty"));
    }
    let n = t2.n() as f64;
    let exponents = candidates
        .iter()
        .map(|c| Ok(-n * mean_squared_diff(&t2.y, &c.predict(&t2.x)?)? / temperature))
        .collect::<Result<Vec<f64>>>()?;
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Convex combination of candidate predictors.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble<P> {
    pub weights: Vec<f64>,
    pub members: Vec<P>,
}

impl<P: Predictor> Predictor for WeightedEnsemble<P> {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.rows()];
        for (w, m) in self.weights.iter().zip(&self.members) {
            if *w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(m.predict(x)?) {
                *o += w * p;
            }
        }
        Ok(out)
    }
}

pub fn aew_aggregate<P: Predictor>(
    candidates: Vec<P>,
    t2: &Dataset,
    temperature: f64,
) -> Result<WeightedEnsemble<P>> {
    let weights = aew_weights(&candidates, t2, temperature)?;
    Ok(WeightedEnsemble { weights, members: candidates })
}

/// Default exponential-weight temperature: twice the sample variance of `y`.
pub fn default_temperature(data: &Dataset) -> f64 {
    let n = data.n();
    if n < 2 {
        return 1.0;
    }
    let mean = data.y.iter().sum::<f64>() / n as f64;
    let var = data.y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;
    if var > 0.0 {
        2.0 * var
    } else {
        1.0
    }
}

/// The target split and fitted candidate family shared by SA-TKRR and AEW-TKRR.
#[derive(Clone, Debug)]
pub struct CandidateStage {
    pub t1: Dataset,
    pub t2: Dataset,
    pub set: CandidateSet,
}

pub fn prepare_candidates(
    target: &Dataset,
    sources: &[Dataset],
    params: &AggregationParams,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<CandidateStage> {
    if target.n() < 4 {
        return Err(Error::invalid(format!(
            "sparse aggregation needs at least 4 target rows, got {}",
            target.n()
        )));
    }
    params.validate()?;
    let (t1, t2) = split_uniform(target, params.t1_fraction, params.split_seed)?;
    let ranking = rank_contrasts_with(&t1, sources, schedule, cfg, exec)?;
    let set = build_candidates_with(&t1, sources, ranking, schedule, cfg, exec)?;
    Ok(CandidateStage { t1, t2, set })
}

/// SA-TKRR output: `weight * first + (1 - weight) * second`.
#[derive(Clone, Debug)]
pub struct AggregateModel {
    pub selection: Selection,
    pub first: Candidate,
    pub second: Candidate,
    pub retrained: bool,
    pub candidates: CandidateSet,
}

impl AggregateModel {
    pub fn idx_a(&self) -> usize {
        self.selection.idx_a
    }

    pub fn idx_b(&self) -> usize {
        self.selection.idx_b
    }

    pub fn weight(&self) -> f64 {
        self.selection.weight
    }
}

impl Predictor for AggregateModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let t = self.selection.weight;
        let mut out = self.first.predict(x)?;
        if t == 1.0 {
            return Ok(out);
        }
        let b = self.second.predict(x)?;
        for (o, q) in out.iter_mut().zip(b) {
            *o = t * *o + (1.0 - t) * q;
        }
        Ok(out)
    }
}

pub fn sa_tkrr(
    target: &Dataset,
    sources: &[Dataset],
    params: &AggregationParams,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
) -> Result<AggregateModel> {
    let stage = prepare_candidates(target, sources, params, schedule, cfg, Execution::default())?;
    sa_tkrr_from_stage(stage, target, sources, params, schedule, cfg, Execution::default())
}

pub fn sa_tkrr_from_stage(
    stage: CandidateStage,
    target: &Dataset,
    sources: &[Dataset],
    params: &AggregationParams,
    schedule: &LambdaSchedule,
    cfg: &KernelConfig,
    exec: Execution,
) -> Result<AggregateModel> {
    let selection = hyper_sparse_aggregate(&stage.set.candidates, &stage.t2, params)?;
    let set = stage.set;
    let (a, b) = (selection.idx_a, selection.idx_b);
    let (first, second) = if params.retrain {
        let refit = |l: usize| {
            fit_candidate(target, sources, &set.nested_sets[l], set.similarity[l], schedule, cfg, exec)
        };
        let first = refit(a)?;
        let second = if b == a { first.clone() } else { refit(b)? };
        (first, second)
    } else {
        (set.candidates[a].clone(), set.candidates[b].clone())
    };
    Ok(AggregateModel { selection, first, second, retrained: params.retrain, candidates: set })
}

/// AEW-TKRR: exponential weights over the candidate family on all of `T2`, no retraining.
pub fn aew_tkrr_from_stage(
    stage: CandidateStage,
    params: &AggregationParams,
) -> Result<WeightedEnsemble<Candidate>> {
    let temperature = params.aew_temperature.unwrap_or_else(|| default_temperature(&stage.t2));
    aew_aggregate(stage.set.candidates, &stage.t2, temperature)
}
