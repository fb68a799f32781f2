//! Seeded generators for the synthetic benchmark examples.
//!
//! Every study draws from its own ChaCha8 stream (`STUDY + k`, target is
//! `k = 0`), covariates first and then the Gaussian noise, so adding sources
//! never changes what the target sees. Shifts come from `SHIFT + k` streams
//! and test points from the `TEST` stream.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Dataset, Matrix};
use crate::seed::{rng_for, streams};

/// Upper end of the shift range for the appended negative sources.
pub const NEGATIVE_SHIFT_MAX: f64 = 0.4;
pub const NEGATIVE_SOURCES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Example {
    #[serde(rename = "ex1")]
    Ex1,
    #[serde(rename = "ex2")]
    Ex2,
    #[serde(rename = "ex3")]
    Ex3,
    #[serde(rename = "ex2_mod")]
    Ex2Mod,
    #[serde(rename = "ex3_mod")]
    Ex3Mod,
}

impl Example {
    pub fn dim(self) -> usize {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 | Example::Ex2Mod => 3,
            Example::Ex3 | Example::Ex3Mod => 10,
        }
    }

    pub fn noise_sd(self) -> f64 {
        match self {
            Example::Ex1 => 0.4,
            _ => 0.3,
        }
    }

    pub fn is_modified(self) -> bool {
        matches!(self, Example::Ex2Mod | Example::Ex3Mod)
    }

    /// Default `(n0, n_k)`.
    pub fn default_sizes(self) -> (usize, usize) {
        match self {
            Example::Ex1 => (200, 150),
            _ => (600, 300),
        }
    }
}

/// Closed-form regression function of an example at a given shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrueFunction {
    pub example: Example,
    pub shift: f64,
}

impl TrueFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = self.shift;
        match self.example {
            Example::Ex1 => 3.0 * (3.0 * PI * x[0]).sin() - 1.5 * (x[0] - s - 0.5).abs().exp(),
            Example::Ex2 | Example::Ex2Mod => {
                (3.0 * PI * x[0]).sin() + 3.0 * (x[0] - s - 0.5).abs() - (x[1] * x[1] - x[2] * x[2]).exp()
            }
            Example::Ex3 | Example::Ex3Mod => {
                let w1 = x[0] + x[3] + x[4] + x[5];
                let w2 = (x[0] + x[1] + x[2]) / 3.0;
                let w3 = x[5] * x[5] + x[6] * x[6] - x[7] * x[7] - x[8] * x[8];
                (0.75 * PI * w1).sin() + 3.0 * (w2 - s - 0.5).abs() - w3.exp()
            }
        }
    }

    pub fn eval_rows(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter().map(|r| self.eval(r)).collect()
    }
}

pub fn gen_true_function(example: Example, shift: f64) -> TrueFunction {
    TrueFunction { example, shift }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub example: Example,
    /// Similarity parameter: regular shifts are drawn from `U(0, s)`.
    #[serde(default)]
    pub s: f64,
    /// Number of regular sources.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub n0: Option<usize>,
    #[serde(default)]
    pub n_k: Option<usize>,
    #[serde(default = "default_n_te")]
    pub n_te: usize,
    /// Draw the shifts once per sweep value instead of once per replication.
    #[serde(default)]
    pub freeze_shifts: bool,
    /// Override of the example's noise level.
    #[serde(default)]
    pub noise_sd: Option<f64>,
}

fn default_m() -> usize {
    10
}

fn default_n_te() -> usize {
    500
}

impl SimSpec {
    pub fn new(example: Example) -> Self {
        Self {
            example,
            s: 0.0,
            m: default_m(),
            n0: None,
            n_k: None,
            n_te: default_n_te(),
            freeze_shifts: false,
            noise_sd: None,
        }
    }

    pub fn n0(&self) -> usize {
        self.n0.unwrap_or(self.example.default_sizes().0)
    }

    pub fn n_k(&self) -> usize {
        self.n_k.unwrap_or(self.example.default_sizes().1)
    }

    pub fn noise(&self) -> f64 {
        self.noise_sd.unwrap_or(self.example.noise_sd())
    }

    /// Regular sources plus the negative sources of the modified examples.
    pub fn num_sources(&self) -> usize {
        self.m + if self.example.is_modified() { NEGATIVE_SOURCES } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("s must be nonnegative, got {}", self.s)));
        }
        if self.example.is_modified() && self.s >= NEGATIVE_SHIFT_MAX {
            return Err(Error::invalid(format!(
                "modified examples need s < {NEGATIVE_SHIFT_MAX}, got {}",
                self.s
            )));
        }
        if self.n0() == 0 {
            return Err(Error::invalid("n0 must be at least 1"));
        }
        if self.num_sources() > 0 && self.n_k() == 0 {
            return Err(Error::invalid("n_k must be at least 1"));
        }
        if let Some(sd) = self.noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::invalid(format!("noise_sd must be nonnegative, got {sd}")));
            }
        }
        Ok(())
    }
}

/// Seeds for one replication: `data` drives covariates, noise and test points;
/// `shift` drives the source shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioSeeds {
    pub data: u64,
    pub shift: u64,
}

impl ScenarioSeeds {
    pub fn single(seed: u64) -> Self {
        Self { data: seed, shift: seed }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub target: Dataset,
    pub sources: Vec<Dataset>,
    pub target_fn: TrueFunction,
    pub shifts: Vec<f64>,
}

/// `n` rows for study `k` (0 is the target) with responses `f(x) + noise_sd * N(0, 1)`.
pub fn gen_study(f: &TrueFunction, n: usize, noise_sd: f64, seed: u64, k: usize) -> Dataset {
    let d = f.example.dim();
    let mut rng = rng_for(seed, streams::STUDY + k as u64);
    let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y = x
        .row_iter()
        .map(|r| {
            let e: f64 = rng.sample(StandardNormal);
            f.eval(r) + noise_sd * e
        })
        .collect();
    Dataset { x, y }
}

/// Source shifts: `U(0, s)` for the regular sources, then `U(s, 0.4)` for the
/// negative sources of the modified examples.
pub fn gen_shifts(spec: &SimSpec, seed: u64) -> Vec<f64> {
    (0..spec.num_sources())
        .map(|k| {
            let u: f64 = rng_for(seed, streams::SHIFT + k as u64).random();
            if k < spec.m {
                spec.s * u
            } else {
                spec.s + (NEGATIVE_SHIFT_MAX - spec.s) * u
            }
        })
        .collect()
}

pub fn gen_scenario(spec: &SimSpec, seeds: ScenarioSeeds) -> Result<Scenario> {
    spec.validate()?;
    let sd = spec.noise();
    let target_fn = gen_true_function(spec.example, 0.0);
    let target = gen_study(&target_fn, spec.n0(), sd, seeds.data, 0);
    let shifts = gen_shifts(spec, seeds.shift);
    let sources = shifts
        .iter()
        .enumerate()
        .map(|(k, &shift)| {
            gen_study(&gen_true_function(spec.example, shift), spec.n_k(), sd, seeds.data, k + 1)
        })
        .collect();
    Ok(Scenario { target, sources, target_fn, shifts })
}

/// Fresh covariates and the noiseless target values at them.
pub fn gen_test(spec: &SimSpec, f: &TrueFunction, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = rng_for(seed, streams::TEST);
    let x = Matrix::from_fn(spec.n_te, spec.example.dim(), |_, _| rng.random::<f64>());
    let f0 = f.eval_rows(&x);
    (x, f0)
}
