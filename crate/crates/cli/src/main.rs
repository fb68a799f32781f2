use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tkrr::datasets::{read_dataset_csv, write_dataset_csv};
use tkrr::harness::{
    emit_results_csv, emit_summary_csv, emit_svg_lines, fit_method, prediction_error, read_summary_csv,
    replication_seed, run_sweep, summarize, ChartSpec, ExperimentConfig, Method, Prepared, Replication,
    ScenarioConfig,
};
use tkrr::krr::fit_krr;
use tkrr::{Dataset, Predictor};

#[derive(Parser)]
#[command(name = "tkrr", version, about = "Transfer learning for kernel ridge regression")]
struct Cli {
    /// Worker threads (TKRR_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a config and write results.csv, summary.csv and chart.svg.
    Simulate(SimulateArgs),
    /// Fit one method on CSV files and write test-set predictions.
    Fit(FitArgs),
    /// Print the empirical contrast norm and rank of every source.
    Rank(RankArgs),
    /// Render a summary CSV as an SVG line chart.
    Plot(PlotArgs),
    /// Write oracle fixtures and, with a config, one scenario as CSV files.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to these methods (repeatable).
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long)]
    replications: Option<usize>,
    /// Label of the target study in a real-data config.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long = "source")]
    sources: Vec<PathBuf>,
    /// Test CSV; its last column is used as the reference for the printed error.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "SA_TKRR")]
    method: String,
    /// Config supplying kernel, schedules and aggregation settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long = "source")]
    sources: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    summary: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long, default_value = "sweep value")]
    x_label: String,
    #[arg(long, default_value = "prediction error")]
    y_label: String,
    #[arg(long)]
    error_bars: bool,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = match std::env::var("TKRR_THREADS") {
        Ok(v) => Some(v.parse::<usize>().with_context(|| format!("TKRR_THREADS={v:?} is not a count"))?),
        Err(_) => cli.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the worker pool")?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Rank(a) => rank(a),
        Command::Plot(a) => plot(a),
        Command::Fixtures(a) => fixtures(a),
    })
}

fn load_config(path: Option<&Path>) -> Result<Option<ExperimentConfig>> {
    path.map(|p| ExperimentConfig::from_path(p).with_context(|| format!("reading config {}", p.display())))
        .transpose()
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&a.config)
        .with_context(|| format!("reading config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(t) = a.target {
        match &mut cfg.scenario {
            ScenarioConfig::Real(real) => real.target = Some(t),
            ScenarioConfig::Synthetic(_) => bail!("--target applies to real-data configs only"),
        }
    }
    let rows = run_sweep(&cfg)?;
    let summary = summarize(&rows);
    let dir = &cfg.output_dir;
    emit_results_csv(&rows, &dir.join("results.csv"))?;
    emit_summary_csv(&summary, &dir.join("summary.csv"))?;
    let chart = ChartSpec {
        title: a.config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        x_label: cfg.sweep.parameter.label().to_string(),
        y_label: "prediction error".into(),
        error_bars: false,
    };
    emit_svg_lines(&summary, &chart, &dir.join("chart.svg"))?;

    println!("{:<12} {:>10} {:>14} {:>14} {:>5}", "method", "value", "mean", "sd", "n");
    for s in &summary {
        println!(
            "{:<12} {:>10} {:>14.6} {:>14.6} {:>5}",
            s.method, s.sweep_value, s.mean_error, s.std_error, s.n_ok
        );
    }
    let failed: usize = summary.iter().map(|s| s.n_failed).sum();
    println!("failed rows: {failed}");
    println!("wrote {}", dir.display());
    Ok(())
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"scenario": {"synthetic": {"example": "ex1"}}, "methods": ["KRR"],
            "sweep": {"parameter": "s", "values": [0]}}"#,
    )
    .expect("built-in config is valid")
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    paths.iter().map(|p| read_dataset_csv(p).with_context(|| format!("reading {}", p.display()))).collect()
}

fn fit(a: FitArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?.unwrap_or_else(default_config);
    let method: Method = a.method.parse()?;
    let target = read_dataset_csv(&a.target).with_context(|| format!("reading {}", a.target.display()))?;
    let sources = read_all(&a.sources)?;
    let test = read_dataset_csv(&a.test).with_context(|| format!("reading {}", a.test.display()))?;
    let rep = Replication {
        transferable: (0..sources.len()).collect(),
        target,
        sources,
        test_x: test.x.clone(),
        reference: test.y.clone(),
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    let model = fit_method(&cfg, method, &rep, seed)?;
    let predictions = model.predict(&rep.test_x)?;
    let mut out = String::from("prediction\n");
    for p in &predictions {
        out.push_str(&format!("{p}\n"));
    }
    std::fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{method} test error: {}", prediction_error(model.as_ref(), &rep.test_x, &rep.reference)?);
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?.unwrap_or_else(default_config);
    let target = read_dataset_csv(&a.target).with_context(|| format!("reading {}", a.target.display()))?;
    let sources = read_all(&a.sources)?;
    let r = tkrr::rank_contrasts(&target, &sources, &cfg.schedules, &cfg.kernel)?;
    println!("source,contrast_norm,rank");
    for (k, path) in a.sources.iter().enumerate() {
        println!("{},{},{}", path.display(), r.contrast_norms[k], r.ranks[k]);
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let summary = read_summary_csv(&a.summary)?;
    let spec = ChartSpec { title: a.title, x_label: a.x_label, y_label: a.y_label, error_bars: a.error_bars };
    emit_svg_lines(&summary, &spec, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn fixtures(a: FixturesArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let k = tkrr::KernelConfig::default();
    let cases: [(&[f64], &[f64], f64); 3] =
        [(&[0.0], &[2.0], 0.5), (&[0.0, 1.0], &[1.0, 0.0], 0.5), (&[0.0, 0.5, 1.5], &[1.0, -1.0, 0.5], 0.1)];
    let mut krr = Vec::new();
    for (x, y, lambda) in cases {
        let d = Dataset::new(tkrr::Matrix::column(x), y.to_vec())?;
        let m = fit_krr(&d, lambda, &k)?;
        krr.push(json!({"x": x, "y": y, "lambda": lambda, "coefficients": m.coefficients()}));
    }
    let doc = json!({"kernel": {"family": "gaussian", "bandwidth": 1.0}, "krr": krr});
    let path = a.out.join("krr_fixtures.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {}", path.display());

    if let Some(mut cfg) = load_config(a.config.as_deref())? {
        if let Some(seed) = a.seed {
            cfg.seed = seed;
        }
        let rep = Prepared::new(&cfg)?.replication(0, 0)?;
        write_dataset_csv(&rep.target, &a.out.join("target.csv"))?;
        for (i, s) in rep.sources.iter().enumerate() {
            write_dataset_csv(s, &a.out.join(format!("source_{}.csv", i + 1)))?;
        }
        let test = Dataset::new(rep.test_x.clone(), rep.reference.clone())?;
        write_dataset_csv(&test, &a.out.join("test.csv"))?;
        println!("wrote scenario with {} sources (seed {})", rep.sources.len(), replication_seed(&cfg, 0, 0));
    }
    Ok(())
}
