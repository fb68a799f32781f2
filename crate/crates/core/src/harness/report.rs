use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::Method;
use crate::harness::run::ResultRow;

pub const RESULTS_HEADER: &str = "method,sweep_value,replication,seed,test_error,wall_ms";
pub const SUMMARY_HEADER: &str = "method,sweep_value,mean_error,std_error,n_ok,n_failed";

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub sweep_value: f64,
    pub mean_error: f64,
    /// Sample standard deviation across replications (0 for a single one).
    pub std_error: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// One row per (method, sweep value) in first-appearance order. Failed rows
/// are excluded from the statistics and counted in `n_failed`.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.method && k.1 == r.value_index) {
            keys.push((r.method, r.value_index, r.sweep_value));
        }
    }
    keys.into_iter()
        .map(|(method, vi, value)| {
            let cell: Vec<&ResultRow> =
                rows.iter().filter(|r| r.method == method && r.value_index == vi).collect();
            let ok: Vec<f64> = cell.iter().filter(|r| r.is_ok()).map(|r| r.test_error).collect();
            let (mean_error, std_error) = mean_sd(&ok);
            SummaryRow {
                method: method.name().to_string(),
                sweep_value: value,
                mean_error,
                std_error,
                n_ok: ok.len(),
                n_failed: cell.len() - ok.len(),
            }
        })
        .collect()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.sweep_value, r.replication, r.seed, r.test_error, r.wall_ms
        ));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.sweep_value, r.mean_error, r.std_error, r.n_ok, r.n_failed
        ));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn emit_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_text(path, &results_csv(rows))
}

pub fn emit_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_text(path, &summary_csv(rows))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != SUMMARY_HEADER {
        return Err(Error::invalid(format!("{}: expected header {SUMMARY_HEADER}", path.display())));
    }
    let bad = |line: usize, what: &str| Error::invalid(format!("{}: row {line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let f = |j: usize, what: &str| {
            rec.get(j).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(i + 1, what))
        };
        let u = |j: usize, what: &str| {
            rec.get(j).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad(i + 1, what))
        };
        out.push(SummaryRow {
            method: rec.get(0).unwrap_or_default().to_string(),
            sweep_value: f(1, "sweep_value")?,
            mean_error: f(2, "mean_error")?,
            std_error: f(3, "std_error")?,
            n_ok: u(4, "n_ok")?,
            n_failed: u(5, "n_failed")?,
        });
    }
    Ok(out)
}
