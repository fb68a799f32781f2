//! CSV ingestion for real-data studies, feature standardization and seeded
//! subsampling.
//!
//! Feature columns prefixed with `categorical:` are one-hot encoded; the level
//! set is the sorted union over all studies loaded together so every study
//! shares the same design columns.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::partition_indices;
use crate::error::{Error, Result};
use crate::matrix::{Dataset, Matrix};
use crate::seed::streams;

pub const CATEGORICAL_PREFIX: &str = "categorical:";
/// Features with a standard deviation below this are left unscaled.
pub const SD_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Target,
    Source,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFilter {
    pub column: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub path: PathBuf,
    pub feature_columns: Vec<String>,
    pub response_column: String,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub delimiter: Option<char>,
    /// Keep only rows whose `column` equals `value` (several studies may share one file).
    #[serde(default)]
    pub filter: Option<RowFilter>,
    /// Responses are multiplied by this factor after parsing.
    #[serde(default = "unit")]
    pub response_scale: f64,
}

fn yes() -> bool {
    true
}

fn unit() -> f64 {
    1.0
}

impl StudyConfig {
    pub fn new(path: impl Into<PathBuf>, features: &[&str], response: &str) -> Self {
        Self {
            path: path.into(),
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            response_column: response.into(),
            standardize: true,
            role: Role::Target,
            label: String::new(),
            delimiter: None,
            filter: None,
            response_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::invalid(format!("{}: no feature columns configured", self.path.display())));
        }
        if self.feature_columns.iter().any(|c| feature_name(c) == self.response_column) {
            return Err(Error::invalid(format!(
                "response column {:?} is also listed as a feature",
                self.response_column
            )));
        }
        if !(self.response_scale.is_finite() && self.response_scale != 0.0) {
            return Err(Error::invalid("response_scale must be finite and nonzero"));
        }
        Ok(())
    }
}

fn feature_name(col: &str) -> &str {
    col.strip_prefix(CATEGORICAL_PREFIX).unwrap_or(col)
}

/// Parsed but not yet encoded rows from one file.
struct RawStudy {
    numeric: Vec<Vec<f64>>,
    categorical: Vec<Vec<String>>,
    y: Vec<f64>,
}

fn read_raw(cfg: &StudyConfig) -> Result<RawStudy> {
    cfg.validate()?;
    let file = File::open(&cfg.path).map_err(|e| Error::io(&cfg.path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter.map_or(b',', |c| c as u8))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn { path: cfg.path.clone(), column: name.to_string() })
    };
    let mut num_idx = Vec::new();
    let mut cat_idx = Vec::new();
    for col in &cfg.feature_columns {
        match col.strip_prefix(CATEGORICAL_PREFIX) {
            Some(name) => cat_idx.push(find(name)?),
            None => num_idx.push(find(col)?),
        }
    }
    let y_idx = find(&cfg.response_column)?;
    let filter = match &cfg.filter {
        Some(f) => Some((find(&f.column)?, f.value.as_str())),
        None => None,
    };

    let mut raw = RawStudy { numeric: Vec::new(), categorical: Vec::new(), y: Vec::new() };
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        if let Some((col, value)) = filter {
            if record.get(col) != Some(value) {
                continue;
            }
        }
        let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        let nums: Option<Vec<f64>> = num_idx.iter().map(|&i| parse(i)).collect();
        let cats: Option<Vec<String>> =
            cat_idx.iter().map(|&i| record.get(i).filter(|s| !s.is_empty()).map(str::to_string)).collect();
        match (nums, cats, parse(y_idx)) {
            (Some(n), Some(c), Some(y)) => {
                raw.numeric.push(n);
                raw.categorical.push(c);
                raw.y.push(y * cfg.response_scale);
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing or non-numeric values", cfg.path.display());
    }
    Ok(raw)
}

/// Design matrix layout: numeric features in configured order, then the
/// one-hot blocks of each categorical feature in configured order.
fn encode(cfg: &StudyConfig, raw: RawStudy, levels: &[Vec<String>]) -> Result<Dataset> {
    let n_num = raw.numeric.first().map_or_else(
        || cfg.feature_columns.iter().filter(|c| !c.starts_with(CATEGORICAL_PREFIX)).count(),
        Vec::len,
    );
    let d = n_num + levels.iter().map(Vec::len).sum::<usize>();
    if d == 0 {
        return Err(Error::invalid(format!("{}: design has no columns", cfg.path.display())));
    }
    let mut data = Vec::with_capacity(raw.y.len() * d);
    for (nums, cats) in raw.numeric.iter().zip(&raw.categorical) {
        data.extend_from_slice(nums);
        for (value, lv) in cats.iter().zip(levels) {
            data.extend(lv.iter().map(|l| if l == value { 1.0 } else { 0.0 }));
        }
    }
    Dataset::new(Matrix::new(raw.y.len(), d, data)?, raw.y)
}

fn category_levels(raws: &[RawStudy], n_cat: usize) -> Vec<Vec<String>> {
    let mut sets = vec![BTreeSet::new(); n_cat];
    for raw in raws {
        for row in &raw.categorical {
            for (set, v) in sets.iter_mut().zip(row) {
                set.insert(v.clone());
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Loads one study. Standardization is not applied here: fit a
/// [`Standardizer`] on the training split instead.
pub fn load_csv(cfg: &StudyConfig) -> Result<Dataset> {
    let mut all = load_studies(std::slice::from_ref(cfg))?;
    Ok(all.remove(0))
}

/// Loads several studies with a shared one-hot encoding. All studies must
/// list the same feature columns.
pub fn load_studies(cfgs: &[StudyConfig]) -> Result<Vec<Dataset>> {
    let Some(first) = cfgs.first() else {
        return Ok(Vec::new());
    };
    if let Some(bad) = cfgs.iter().find(|c| c.feature_columns != first.feature_columns) {
        return Err(Error::invalid(format!(
            "{} lists different feature columns than {}",
            bad.path.display(),
            first.path.display()
        )));
    }
    let raws = cfgs.iter().map(read_raw).collect::<Result<Vec<_>>>()?;
    let n_cat = first.feature_columns.iter().filter(|c| c.starts_with(CATEGORICAL_PREFIX)).count();
    let levels = category_levels(&raws, n_cat);
    cfgs.iter().zip(raws).map(|(cfg, raw)| encode(cfg, raw, &levels)).collect()
}

/// Per-column affine map to mean 0 and standard deviation 1 (population sd).
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::invalid("cannot standardize an empty sample"));
        }
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for row in x.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in x.row_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd < SD_GUARD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "standardizer has {} columns, matrix has {}",
                self.mean.len(),
                x.cols()
            )));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j]))
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        Dataset::new(self.apply(&data.x)?, data.y.clone())
    }
}

/// `n_train` rows drawn uniformly without replacement; the rest form the test set.
pub fn subsample_split(data: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train > data.n() {
        return Err(Error::invalid(format!("n_train must lie in [1, {}], got {n_train}", data.n())));
    }
    let (train, test) = partition_indices(data.n(), n_train, seed, streams::SPLIT);
    Ok((data.select(&train), data.select(&test)))
}

/// Header `x1..xd,y`; values use the shortest representation that parses back exactly.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).chain(["y".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, y) in data.x.row_iter().zip(&data.y) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_dataset_csv`]: every column but the last is a covariate.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(Error::invalid(format!(
            "{}: need at least one covariate and a response",
            path.display()
        )));
    }
    let mut data = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::invalid(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        data.extend_from_slice(&values[..width - 1]);
        y.push(values[width - 1]);
    }
    Dataset::new(Matrix::new(y.len(), width - 1, data)?, y)
}
