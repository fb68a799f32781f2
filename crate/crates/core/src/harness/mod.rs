//! Experiment orchestration: configuration, sweeps over replications,
//! summaries and charts.

pub mod config;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{ExperimentConfig, Method, RealScenario, ScenarioConfig, Sweep, SweepParameter, TrainSize};
pub use report::{
    emit_results_csv, emit_summary_csv, mean_sd, read_summary_csv, results_csv, summarize, summary_csv,
    SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use run::{
    evaluate_methods, fit_method, prediction_error, replication_seed, run_sweep, run_sweep_with, Prepared,
    Replication, ResultRow,
};
pub use svg::{emit_svg_lines, render_svg, series_from_summary, ChartSpec, Series};
