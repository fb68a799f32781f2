use std::time::Instant;

use crate::aggregate::{
    aew_tkrr_from_stage, prepare_candidates, sa_tkrr_from_stage, AggregationParams, CandidateStage,
};
use crate::datasets::{load_studies, Standardizer};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method, RealScenario, ScenarioConfig, SweepParameter};
use crate::kernel::KernelConfig;
use crate::krr::{fit_krr_with, schedule_lambda_debias, schedule_lambda_source, KrrModel, LambdaSchedule};
use crate::matrix::{Dataset, Matrix};
use crate::model::{mean_squared_diff, Predictor};
use crate::par::Execution;
use crate::seed::{derive_seed, mix64, streams};
use crate::synthetic::{gen_scenario, gen_test, ScenarioSeeds, SimSpec};
use crate::transfer::{fit_debias_with, fit_pooled_with, without_debias, SourceCollection, TransferModel};

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_value: f64,
    /// Position of `sweep_value` in the configured list.
    pub value_index: usize,
    pub replication: usize,
    pub seed: u64,
    /// NaN when the fit failed.
    pub test_error: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Mean squared deviation between predictions and reference values.
pub fn prediction_error<P: Predictor + ?Sized>(f: &P, x: &Matrix, reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("prediction error on an empty test set"));
    }
    mean_squared_diff(&f.predict(x)?, reference)
}

/// Data for one (sweep value, replication) cell.
#[derive(Clone, Debug)]
pub struct Replication {
    pub target: Dataset,
    pub sources: Vec<Dataset>,
    /// Sources treated as transferable by the A_h methods.
    pub transferable: Vec<usize>,
    pub test_x: Matrix,
    pub reference: Vec<f64>,
}

/// Seed of replication `rep` at sweep position `value_index`.
pub fn replication_seed(cfg: &ExperimentConfig, value_index: usize, rep: usize) -> u64 {
    derive_seed(cfg.seed, value_index as u64, rep as u64)
}

fn frozen_shift_seed(base: u64) -> u64 {
    derive_seed(base, u64::MAX, u64::MAX)
}

/// Synthetic spec and transferable count at one sweep value.
pub fn synthetic_at(cfg: &ExperimentConfig, spec: &SimSpec, value: f64) -> Result<(SimSpec, usize)> {
    let mut spec = spec.clone();
    let mut transferable = cfg.transferable;
    match cfg.sweep.parameter {
        SweepParameter::S => spec.s = value,
        SweepParameter::AH => transferable = Some(value as usize),
        SweepParameter::N0 => spec.n0 = Some(value as usize),
        SweepParameter::M => spec.m = value as usize,
        SweepParameter::NAh => {
            let a = transferable.unwrap_or(spec.m);
            if a == 0 {
                return Err(Error::invalid("sweep over n_Ah needs at least one transferable source"));
            }
            spec.n_k = Some((value / a as f64).round() as usize);
        }
    }
    spec.validate()?;
    let a = transferable.unwrap_or(spec.m);
    if a > spec.m {
        return Err(Error::invalid(format!(
            "{a} transferable sources requested but only {} regular sources exist",
            spec.m
        )));
    }
    Ok((spec, a))
}

fn synthetic_replication(
    cfg: &ExperimentConfig,
    spec: &SimSpec,
    value: f64,
    seed: u64,
) -> Result<Replication> {
    let (spec, a) = synthetic_at(cfg, spec, value)?;
    let seeds = ScenarioSeeds {
        data: seed,
        shift: if spec.freeze_shifts { frozen_shift_seed(cfg.seed) } else { seed },
    };
    let sc = gen_scenario(&spec, seeds)?;
    let (test_x, reference) = gen_test(&spec, &sc.target_fn, seed);
    Ok(Replication {
        target: sc.target,
        sources: sc.sources,
        transferable: (0..a).collect(),
        test_x,
        reference,
    })
}

fn draw_rows(data: &Dataset, n: usize, seed: u64, stream: u64) -> Dataset {
    if n >= data.n() {
        return data.clone();
    }
    let (rows, _) = crate::aggregate::partition_indices(data.n(), n, seed, stream);
    data.select(&rows)
}

fn standardize_pair(train: &Dataset, rest: &Dataset) -> Result<(Dataset, Dataset)> {
    let st = Standardizer::fit(&train.x)?;
    Ok((st.apply_dataset(train)?, st.apply_dataset(rest)?))
}

fn real_replication(
    cfg: &ExperimentConfig,
    real: &RealScenario,
    loaded: &[Dataset],
    value: f64,
    seed: u64,
) -> Result<Replication> {
    let t = real.target_index()?;
    let mut n_train = real.target_train.resolve(loaded[t].n());
    let mut source_size = real.source_size;
    let mut transferable = cfg.transferable;
    match cfg.sweep.parameter {
        SweepParameter::N0 => n_train = value as usize,
        SweepParameter::NAh => source_size = Some(value as usize),
        SweepParameter::AH => transferable = Some(value as usize),
        SweepParameter::S | SweepParameter::M => {
            return Err(Error::invalid("sweep parameter not defined for real data"))
        }
    }
    let target_all = &loaded[t];
    if n_train == 0 || n_train >= target_all.n() {
        return Err(Error::invalid(format!(
            "target training size {n_train} leaves no test rows (target has {})",
            target_all.n()
        )));
    }
    let (rows, rest) = crate::aggregate::partition_indices(target_all.n(), n_train, seed, streams::SPLIT);
    let (mut target, mut test) = (target_all.select(&rows), target_all.select(&rest));
    if real.studies[t].standardize {
        (target, test) = standardize_pair(&target, &test)?;
    }
    let mut sources = Vec::new();
    for (k, (study, data)) in real.studies.iter().zip(loaded).enumerate() {
        if k == t {
            continue;
        }
        let n = source_size.unwrap_or(data.n());
        if n == 0 || data.is_empty() {
            continue;
        }
        let mut d = draw_rows(data, n, seed, streams::STUDY + 1 + k as u64);
        if study.standardize {
            let st = Standardizer::fit(&d.x)?;
            d = st.apply_dataset(&d)?;
        }
        sources.push(d);
    }
    let a = transferable.unwrap_or(sources.len()).min(sources.len());
    Ok(Replication { target, sources, transferable: (0..a).collect(), test_x: test.x, reference: test.y })
}

/// Builds the data for every cell lazily from a shared prepared scenario.
pub struct Prepared<'a> {
    cfg: &'a ExperimentConfig,
    loaded: Vec<Dataset>,
}

impl<'a> Prepared<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let loaded = match &cfg.scenario {
            ScenarioConfig::Synthetic(_) => Vec::new(),
            ScenarioConfig::Real(real) => load_studies(&real.studies)?,
        };
        Ok(Self { cfg, loaded })
    }

    pub fn replication(&self, value_index: usize, rep: usize) -> Result<Replication> {
        let value = self.cfg.sweep.values[value_index];
        let seed = replication_seed(self.cfg, value_index, rep);
        match &self.cfg.scenario {
            ScenarioConfig::Synthetic(spec) => synthetic_replication(self.cfg, spec, value, seed),
            ScenarioConfig::Real(real) => real_replication(self.cfg, real, &self.loaded, value, seed),
        }
    }
}

/// Fits shared by several methods within one replication.
struct Fits<'a> {
    rep: &'a Replication,
    cfg: &'a ExperimentConfig,
    params: AggregationParams,
    target_krr: Option<std::result::Result<KrrModel, String>>,
    pooled: Option<std::result::Result<KrrModel, String>>,
}

type Outcome = std::result::Result<f64, String>;

impl<'a> Fits<'a> {
    fn schedule(&self) -> &LambdaSchedule {
        &self.cfg.schedules
    }

    fn kernel(&self) -> &KernelConfig {
        &self.cfg.kernel
    }

    fn target_krr(&mut self) -> std::result::Result<&KrrModel, String> {
        if self.target_krr.is_none() {
            let r = (|| {
                let lambda = schedule_lambda_source(self.rep.target.n(), self.schedule())?;
                fit_krr_with(&self.rep.target, lambda, self.kernel(), Execution::Sequential)
            })();
            self.target_krr = Some(r.map_err(|e| e.to_string()));
        }
        self.target_krr.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }

    fn pooled_fit(&self, set: &[usize]) -> Result<KrrModel> {
        let coll = SourceCollection::new(&self.rep.sources, set)?;
        let lambda1 =
            schedule_lambda_source(coll.transferable_size() + self.rep.target.n(), self.schedule())?;
        fit_pooled_with(&self.rep.target, &coll, lambda1, self.kernel(), Execution::Sequential)
    }

    fn ah_pooled(&mut self) -> std::result::Result<KrrModel, String> {
        if self.pooled.is_none() {
            let r = self.pooled_fit(&self.rep.transferable);
            self.pooled = Some(r.map_err(|e| e.to_string()));
        }
        self.pooled.clone().unwrap()
    }

    fn debiased(&self, pooled: KrrModel) -> std::result::Result<TransferModel, String> {
        let h = self.cfg.similarity;
        let n0 = self.rep.target.n();
        let r = (|| {
            let lambda2 = schedule_lambda_debias(n0, h, self.schedule())?;
            let debias =
                fit_debias_with(&self.rep.target, &pooled, lambda2, self.kernel(), Execution::Sequential)?;
            Ok::<_, Error>(TransferModel { lambda1: pooled.ridge, pooled: pooled.clone(), debias, lambda2 })
        })();
        r.map_err(|e| e.to_string())
    }

    fn score<P: Predictor + ?Sized>(&self, f: &P) -> Outcome {
        prediction_error(f, &self.rep.test_x, &self.rep.reference).map_err(|e| e.to_string())
    }

    fn model(
        &mut self,
        method: Method,
        stage: &mut Option<StageResult>,
    ) -> std::result::Result<Box<dyn Predictor>, String> {
        let err = |e: Error| e.to_string();
        Ok(match method {
            Method::Krr => Box::new(self.target_krr()?.clone()),
            Method::AhTkrr => {
                let pooled = self.ah_pooled()?;
                Box::new(self.debiased(pooled)?)
            }
            Method::AhTkrrWd => Box::new(without_debias(self.ah_pooled()?, &self.rep.target, self.kernel())),
            Method::PooledTkrr => {
                let all: Vec<usize> = (0..self.rep.sources.len()).collect();
                let pooled = if all == self.rep.transferable {
                    self.ah_pooled()?
                } else {
                    self.pooled_fit(&all).map_err(err)?
                };
                Box::new(self.debiased(pooled)?)
            }
            Method::SaTkrr | Method::AewTkrr => {
                if stage.is_none() {
                    let s = prepare_candidates(
                        &self.rep.target,
                        &self.rep.sources,
                        &self.params,
                        self.schedule(),
                        self.kernel(),
                        Execution::Sequential,
                    );
                    *stage = Some(s.map_err(err));
                }
                let st = stage.as_ref().unwrap().as_ref().map_err(Clone::clone)?.clone();
                if method == Method::SaTkrr {
                    Box::new(
                        sa_tkrr_from_stage(
                            st,
                            &self.rep.target,
                            &self.rep.sources,
                            &self.params,
                            self.schedule(),
                            self.kernel(),
                            Execution::Sequential,
                        )
                        .map_err(err)?,
                    )
                } else {
                    Box::new(aew_tkrr_from_stage(st, &self.params).map_err(err)?)
                }
            }
        })
    }
}

type StageResult = std::result::Result<CandidateStage, String>;

fn replication_params(cfg: &ExperimentConfig, seed: u64) -> AggregationParams {
    AggregationParams { split_seed: mix64(cfg.aggregation.split_seed ^ seed), ..cfg.aggregation }
}

/// Fits one method on a replication exactly as the sweep does.
pub fn fit_method(
    cfg: &ExperimentConfig,
    method: Method,
    rep: &Replication,
    seed: u64,
) -> Result<Box<dyn Predictor>> {
    let mut fits = Fits { rep, cfg, params: replication_params(cfg, seed), target_krr: None, pooled: None };
    fits.model(method, &mut None).map_err(Error::invalid)
}

/// Fits every configured method on one replication, in configuration order.
pub fn evaluate_methods(cfg: &ExperimentConfig, rep: &Replication, seed: u64) -> Vec<(Method, Outcome, f64)> {
    let mut fits = Fits { rep, cfg, params: replication_params(cfg, seed), target_krr: None, pooled: None };
    let mut stage = None;
    cfg.methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let out = fits.model(m, &mut stage).and_then(|f| fits.score(f.as_ref()));
            let ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            (m, out, ms)
        })
        .collect()
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep_with(cfg, Execution::default())
}

/// Runs every (sweep value, replication) cell, parallel across cells. Rows
/// are sorted by (method, sweep position, replication).
pub fn run_sweep_with(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let prepared = Prepared::new(cfg)?;
    let reps = cfg.replications;
    let cells = cfg.sweep.values.len() * reps;
    let per_cell = exec.map(cells, |c| {
        let (vi, rep) = (c / reps, c % reps);
        let seed = replication_seed(cfg, vi, rep);
        let value = cfg.sweep.values[vi];
        let row = |method, outcome: Outcome, wall_ms| {
            let (test_error, error) = match outcome {
                Ok(e) => (e, None),
                Err(msg) => {
                    log::warn!("{method} at {value} (replication {rep}) failed: {msg}");
                    (f64::NAN, Some(msg))
                }
            };
            ResultRow {
                method,
                sweep_value: value,
                value_index: vi,
                replication: rep,
                seed,
                test_error,
                wall_ms,
                error,
            }
        };
        match prepared.replication(vi, rep) {
            Ok(data) => evaluate_methods(cfg, &data, seed)
                .into_iter()
                .map(|(m, o, ms)| row(m, o, ms))
                .collect::<Vec<_>>(),
            Err(e) => {
                let msg = e.to_string();
                cfg.methods.iter().map(|&m| row(m, Err(msg.clone()), 0.0)).collect()
            }
        }
    });
    let mut rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.method, r.value_index, r.replication));
    Ok(rows)
}
