use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationParams;
use crate::datasets::{Role, StudyConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::krr::LambdaSchedule;
use crate::synthetic::SimSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "KRR")]
    Krr,
    #[serde(rename = "AhTKRR")]
    AhTkrr,
    #[serde(rename = "AhTKRR_WD")]
    AhTkrrWd,
    #[serde(rename = "Pooled_TKRR")]
    PooledTkrr,
    #[serde(rename = "SA_TKRR")]
    SaTkrr,
    #[serde(rename = "AEW_TKRR")]
    AewTkrr,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Krr, Method::AhTkrr, Method::AhTkrrWd, Method::PooledTkrr, Method::SaTkrr, Method::AewTkrr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Krr => "KRR",
            Method::AhTkrr => "AhTKRR",
            Method::AhTkrrWd => "AhTKRR_WD",
            Method::PooledTkrr => "Pooled_TKRR",
            Method::SaTkrr => "SA_TKRR",
            Method::AewTkrr => "AEW_TKRR",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Similarity parameter of the synthetic shifts.
    S,
    /// Number of transferable sources.
    AH,
    /// Target sample size (training rows for real data).
    N0,
    /// Total transferable source size; synthetic studies get `round(v / |A_h|)` rows each.
    NAh,
    /// Number of regular sources.
    M,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::S => "s",
            SweepParameter::AH => "|A_h|",
            SweepParameter::N0 => "n0",
            SweepParameter::NAh => "n_Ah",
            SweepParameter::M => "m",
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, SweepParameter::S)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Size of the target training split in a real-data scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainSize {
    Count(usize),
    Fraction(f64),
}

impl TrainSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            TrainSize::Count(c) => c,
            TrainSize::Fraction(f) => ((f * n as f64).round() as usize).clamp(1, n.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealScenario {
    pub studies: Vec<StudyConfig>,
    /// Label of the target study; overrides the `role` fields when set.
    #[serde(default)]
    pub target: Option<String>,
    pub target_train: TrainSize,
    /// Rows drawn from each source study per replication; `None` uses all rows.
    #[serde(default)]
    pub source_size: Option<usize>,
}

impl RealScenario {
    /// Index of the target study.
    pub fn target_index(&self) -> Result<usize> {
        let found: Vec<usize> = match &self.target {
            Some(label) => {
                self.studies.iter().enumerate().filter(|(_, s)| &s.label == label).map(|(i, _)| i).collect()
            }
            None => self
                .studies
                .iter()
                .enumerate()
                .filter(|(_, s)| s.role == Role::Target)
                .map(|(i, _)| i)
                .collect(),
        };
        match found.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::invalid("real scenario has no target study")),
            _ => Err(Error::invalid("real scenario has more than one target study")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Synthetic(SimSpec),
    Real(RealScenario),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form note carried along with the experiment record.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub schedules: LambdaSchedule,
    #[serde(default)]
    pub aggregation: AggregationParams,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Record per-fit wall time; off by default so outputs are byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Number of leading sources treated as transferable by the A_h methods;
    /// `None` means every regular source.
    #[serde(default)]
    pub transferable: Option<usize>,
    /// Similarity level `h` in the debias ridge of the methods whose
    /// transferable set is given rather than estimated.
    #[serde(default = "default_similarity")]
    pub similarity: f64,
}

fn default_replications() -> usize {
    100
}

fn default_similarity() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must be nonempty"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::invalid("sweep values must be nonempty"));
        }
        for &v in &self.sweep.values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("sweep value {v} must be finite and nonnegative")));
            }
            if self.sweep.parameter.is_integer() && v.fract() != 0.0 {
                return Err(Error::invalid(format!(
                    "sweep over {} needs integer values, got {v}",
                    self.sweep.parameter.label()
                )));
            }
        }
        if !(self.similarity >= 0.0 && self.similarity.is_finite()) {
            return Err(Error::invalid(format!("similarity must be nonnegative, got {}", self.similarity)));
        }
        self.schedules.validate()?;
        self.aggregation.validate()?;
        self.kernel.validate()?;
        match &self.scenario {
            ScenarioConfig::Synthetic(spec) => {
                if self.sweep.parameter != SweepParameter::S {
                    spec.validate()?;
                }
                if self.sweep.parameter == SweepParameter::S && spec.example.is_modified() {
                    if let Some(v) =
                        self.sweep.values.iter().find(|&&v| v >= crate::synthetic::NEGATIVE_SHIFT_MAX)
                    {
                        return Err(Error::invalid(format!("modified examples need s < 0.4, got {v}")));
                    }
                }
            }
            ScenarioConfig::Real(real) => {
                if self.sweep.parameter == SweepParameter::S || self.sweep.parameter == SweepParameter::M {
                    return Err(Error::invalid(format!(
                        "sweep over {} is only defined for synthetic scenarios",
                        self.sweep.parameter.label()
                    )));
                }
                real.target_index()?;
                for s in &real.studies {
                    s.validate()?;
                }
            }
        }
        Ok(())
    }
}
