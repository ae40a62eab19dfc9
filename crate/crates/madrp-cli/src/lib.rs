//! Command-line front end: `solve` one allocation strategy on a price
//! dataset, `bench` several strategies on one window, `backtest` them over
//! rolling out-of-sample windows, and `synth` deterministic synthetic
//! datasets to drive the other three.
//!
//! Every command is deterministic given its flags (and seed); with
//! `--timings zero` the emitted files and stdout are byte-identical across
//! repeated runs. Option precedence is CLI flag over config-file value over
//! built-in default. Exit codes: 0 on success, 1 on a computation failure
//! (with a one-line JSON error report on stderr), 2 on a usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use madrp::backtest::{
    metrics_to_csv, metrics_to_text, run_backtest, wealth_to_csv, BacktestResult, MetricSet,
    RollingConfig,
};
use madrp::bench::{run_bench, rows_to_csv, rows_to_text, BenchConfig, BenchRow, TimingMode};
use madrp::scenarios::{
    load_csv, prices_from_returns, returns_from_prices, synth_comonotone, synth_random, write_csv,
    CsvLayout, PriceSeries, ScenarioMatrix,
};
use madrp::solvers::{solve_with, Method, SolveOptions};
use madrp::Error;

/// Environment variable naming the default output directory, consulted when
/// neither `--out-dir` nor the config file provides one.
pub const OUT_DIR_ENV: &str = "MADRP_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "madrp",
    version,
    about = "Mean-absolute-deviation risk parity: solve, compare, and backtest portfolio strategies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Solve one strategy on a price dataset and write its weights and report
    Solve(SolveArgs),
    /// Run several strategies on one dataset window and tabulate accuracy
    Bench(BenchArgs),
    /// Evaluate strategies over rolling out-of-sample windows
    Backtest(BacktestArgs),
    /// Generate a deterministic synthetic price dataset
    Synth(SynthArgs),
}

/// Timing column mode for reports that carry solve times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TimingsArg {
    /// Measure wall-clock time around each solve
    Wall,
    /// Write 0.0 so repeated runs emit byte-identical files
    Zero,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Price CSV: one row per day, one column per asset (header row and
    /// leading date column by default)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML config file supplying defaults for any omitted flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files (default: $MADRP_OUT_DIR, then ".")
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// The data CSV has no header row
    #[arg(long)]
    pub no_header: bool,
    /// The data CSV has no leading date column
    #[arg(long)]
    pub no_date_column: bool,
    /// Solver tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Multi-start count for the least-squares solvers
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Logarithmic penalty weight for the penalized formulation
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Log-sum lower bound for the constrained formulation
    #[arg(long)]
    pub log_floor: Option<f64>,
    /// How to fill timing columns
    #[arg(long, value_enum)]
    pub timings: Option<TimingsArg>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Strategy name (log_obj, log_constr, ls_rel, ls_abs, soe_1, soe_2,
    /// closed_form, vol_rp, min_mad, min_var, ew; aliases madrp, volrp,
    /// minmad, minv)
    #[arg(long)]
    pub method: Option<String>,
    /// Take the asset universe from the dataset (always the case; accepted
    /// so scripts can state it explicitly)
    #[arg(long)]
    pub n_from_data: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated strategy names, or "all"
    #[arg(long)]
    pub methods: Option<String>,
    /// Restrict the dataset to its first N return days
    #[arg(long)]
    pub first_days: Option<usize>,
    /// Run strategies concurrently (forces zeroed timings)
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated strategy names (default minv,minmad,volrp,madrp,ew)
    #[arg(long)]
    pub strategies: Option<String>,
    /// Calibration window length in return days
    #[arg(long)]
    pub in_sample: Option<usize>,
    /// Holding window length in return days
    #[arg(long)]
    pub out_sample: Option<usize>,
    /// Days between recalibrations
    #[arg(long)]
    pub rebalance: Option<usize>,
    /// Trading days per year used for annualization
    #[arg(long)]
    pub annualization: Option<usize>,
    /// Daily risk-free rate used by the ratio metrics
    #[arg(long)]
    pub risk_free: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Market kind: "comonotone" (single common factor, additive risk) or
    /// "random" (few-factor generic market)
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of assets
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of return days (the price file gets t+1 rows)
    #[arg(long)]
    pub t: Option<usize>,
    /// Generator seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated per-asset factor scales (comonotone only)
    #[arg(long)]
    pub scales: Option<String>,
    /// Output file path (default: <out-dir>/synth_<kind>_n<n>_t<t>_seed<seed>.csv)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML config file supplying defaults for any omitted flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for the default output path (default: $MADRP_OUT_DIR, then ".")
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Config-file form of the flags. Unknown keys are rejected so a typo in a
/// config cannot silently fall back to a default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub strategies: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub restarts: Option<usize>,
    pub lambda: Option<f64>,
    pub log_floor: Option<f64>,
    pub first_days: Option<usize>,
    pub parallel: Option<bool>,
    pub timings: Option<String>,
    pub in_sample: Option<usize>,
    pub out_sample: Option<usize>,
    pub rebalance: Option<usize>,
    pub annualization: Option<usize>,
    pub risk_free: Option<f64>,
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub seed: Option<u64>,
    pub scales: Option<Vec<f64>>,
}

/// A failed run, split by exit code: usage errors (2) versus computation
/// failures (1, reported as one JSON line on stderr).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    /// The stderr line for this failure: a usage message, or the
    /// machine-readable error JSON.
    pub fn render(&self) -> String {
        match self {
            Failure::Usage(msg) => format!("usage error: {msg}\nrun with --help for usage"),
            Failure::Run(e) => error_json(e),
        }
    }
}

/// Stable failure category names for the machine-readable error report.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Csv(_) => "csv",
        Error::Io(_) => "io",
        Error::DegenerateMarket(_) => "degenerate_market",
        Error::Solver(_) => "solver",
        Error::SignSystem(_) => "sign_system",
        Error::Config(_) => "config",
    }
}

/// One-line JSON error report: {"error":{"kind":...,"message":...}}.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": { "kind": error_kind(e), "message": e.to_string() }
    })
    .to_string()
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn out_dir(flag: Option<&Path>, cfg: &FileConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return p.clone();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("."),
    }
}

fn csv_layout(common: &CommonArgs) -> CsvLayout {
    CsvLayout {
        has_header: !common.no_header,
        has_date_column: !common.no_date_column,
        ..CsvLayout::default()
    }
}

fn solve_options(common: &CommonArgs, cfg: &FileConfig) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(v) = common.tol.or(cfg.tol) {
        o.tol = v;
    }
    if let Some(v) = common.restarts.or(cfg.restarts) {
        o.restarts = v;
    }
    if let Some(v) = common.lambda.or(cfg.lambda) {
        o.lambda = Some(v);
    }
    if let Some(v) = common.log_floor.or(cfg.log_floor) {
        o.log_floor = Some(v);
    }
    o
}

fn timings(common: &CommonArgs, cfg: &FileConfig) -> Result<TimingMode, Failure> {
    if let Some(t) = common.timings {
        return Ok(match t {
            TimingsArg::Wall => TimingMode::Wall,
            TimingsArg::Zero => TimingMode::Zero,
        });
    }
    match cfg.timings.as_deref() {
        None => Ok(TimingMode::Wall),
        Some("wall") => Ok(TimingMode::Wall),
        Some("zero") => Ok(TimingMode::Zero),
        Some(other) => Err(Failure::Usage(format!(
            "timings must be \"wall\" or \"zero\", got \"{other}\""
        ))),
    }
}

fn require_data(common: &CommonArgs, cfg: &FileConfig) -> Result<PathBuf, Failure> {
    common
        .data
        .clone()
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| Failure::Usage("no dataset: pass --data or set data in the config".into()))
}

fn load_market(path: &Path, layout: &CsvLayout) -> Result<(PriceSeries, ScenarioMatrix), Error> {
    let series = load_csv(path, layout)?;
    let scn = returns_from_prices(&series)?;
    Ok((series, scn))
}

/// Parses a comma-separated strategy list; `"all"` expands to every method.
/// Unknown names and empty lists are usage errors.
pub fn parse_method_list(spec: &str) -> Result<Vec<Method>, Failure> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::all().to_vec());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let name = part.trim();
        if name.is_empty() {
            continue;
        }
        out.push(Method::from_str(name).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    if out.is_empty() {
        return Err(Failure::Usage("empty strategy list".into()));
    }
    Ok(out)
}

fn method_names_to_list(names: &[String]) -> Result<Vec<Method>, Failure> {
    parse_method_list(&names.join(","))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Failure::Run(Error::Io(e)))?;
        }
    }
    fs::write(path, contents).map_err(|e| Failure::Run(Error::Io(e)))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Full-precision weights table: `asset_id,weight`, weights printed with the
/// shortest representation that parses back to the identical f64.
pub fn weights_csv(asset_ids: &[String], weights: &[f64]) -> String {
    let mut out = String::from("asset_id,weight\n");
    for (id, w) in asset_ids.iter().zip(weights.iter()) {
        let _ = writeln!(out, "{id},{w}");
    }
    out
}

/// Reads a weights table written by `solve` back into (asset_id, weight)
/// pairs.
pub fn read_weights_csv(path: &Path) -> Result<Vec<(String, f64)>, Error> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("asset_id,weight") => {}
        other => {
            return Err(Error::Csv(format!(
                "{}: expected header asset_id,weight, got {other:?}",
                path.display()
            )))
        }
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let (id, w) = line.split_once(',').ok_or_else(|| {
            Error::Csv(format!("{}: row {} has no comma", path.display(), k + 1))
        })?;
        let w: f64 = w.parse().map_err(|e| {
            Error::Csv(format!("{}: row {} weight: {e}", path.display(), k + 1))
        })?;
        out.push((id.to_string(), w));
    }
    Ok(out)
}

/// Reads a metric table written by `backtest` back into
/// (strategy, nine optional metric cells) rows; empty cells are None.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(String, Vec<Option<f64>>)>, Error> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let expect = "strategy,mean_annual,std_annual,sharpe,sortino,mdd,ulcer,turnover,rachev_5,rachev_10";
    if header != expect {
        return Err(Error::Csv(format!(
            "{}: unexpected metric header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let mut cells = line.split(',');
        let name = cells.next().unwrap_or_default().to_string();
        let mut row = Vec::new();
        for cell in cells {
            if cell.is_empty() {
                row.push(None);
            } else {
                row.push(Some(cell.parse().map_err(|e| {
                    Error::Csv(format!("{}: row {}: {e}", path.display(), k + 1))
                })?));
            }
        }
        if row.len() != 9 {
            return Err(Error::Csv(format!(
                "{}: row {} has {} metric cells, expected 9",
                path.display(),
                k + 1,
                row.len()
            )));
        }
        out.push((name, row));
    }
    Ok(out)
}

/// Reads a combined wealth table back into (strategy names, per-day rows).
pub fn read_wealth_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), Error> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut cols = header.split(',');
    if cols.next() != Some("day") {
        return Err(Error::Csv(format!(
            "{}: wealth header must start with day",
            path.display()
        )));
    }
    let names: Vec<String> = cols.map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let mut cells = line.split(',');
        let day: usize = cells
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| Error::Csv(format!("{}: row {}: {e}", path.display(), k + 1)))?;
        if day != k {
            return Err(Error::Csv(format!(
                "{}: day column jumps to {day} at row {}",
                path.display(),
                k + 1
            )));
        }
        let row: Vec<f64> = cells
            .map(|c| {
                c.parse().map_err(|e| {
                    Error::Csv(format!("{}: row {}: {e}", path.display(), k + 1))
                })
            })
            .collect::<Result<_, Error>>()?;
        if row.len() != names.len() {
            return Err(Error::Csv(format!(
                "{}: row {} has {} cells for {} strategies",
                path.display(),
                k + 1,
                row.len(),
                names.len()
            )));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let cfg = load_config(args.common.config.as_deref())?;
    let data = require_data(&args.common, &cfg)?;
    let method_name = args
        .method
        .clone()
        .or_else(|| cfg.method.clone())
        .ok_or_else(|| Failure::Usage("no method: pass --method or set it in the config".into()))?;
    let method =
        Method::from_str(&method_name).map_err(|e| Failure::Usage(e.to_string()))?;
    let opts = solve_options(&args.common, &cfg);
    let mode = timings(&args.common, &cfg)?;
    let dir = out_dir(args.common.out_dir.as_deref(), &cfg);

    let (series, scn) = load_market(&data, &csv_layout(&args.common))?;
    let mut report = solve_with(method, &scn, &opts)?;
    if mode == TimingMode::Zero {
        report.wall_time = 0.0;
    }

    write_file(
        &dir.join(format!("weights_{method}.csv")),
        &weights_csv(series.asset_ids(), report.weights.values()),
    )?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Run(Error::Config(format!("report serialization: {e}"))))?;
    write_file(&dir.join(format!("report_{method}.json")), &(json + "\n"))?;

    let row = BenchRow {
        method,
        weights: Some(report.weights.values().to_vec()),
        f_value: report.f_value,
        mad_value: Some(report.mad_value),
        mean_abs_dev: report.mean_abs_dev,
        max_abs_dev: report.max_abs_dev,
        one_over_n: 1.0 / scn.n_assets() as f64,
        time_secs: report.wall_time,
        error: None,
    };
    print!("{}", rows_to_text(&[row]));
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let cfg = load_config(args.common.config.as_deref())?;
    let data = require_data(&args.common, &cfg)?;
    let methods = match (&args.methods, &cfg.methods) {
        (Some(spec), _) => parse_method_list(spec)?,
        (None, Some(names)) => method_names_to_list(names)?,
        (None, None) => Method::all().to_vec(),
    };
    let bench_cfg = BenchConfig {
        first_days: args.first_days.or(cfg.first_days),
        options: solve_options(&args.common, &cfg),
        timings: timings(&args.common, &cfg)?,
        parallel: args.parallel || cfg.parallel.unwrap_or(false),
    };
    let dir = out_dir(args.common.out_dir.as_deref(), &cfg);

    let (_, scn) = load_market(&data, &csv_layout(&args.common))?;
    let rows = run_bench(&scn, &methods, &bench_cfg)?;
    write_file(&dir.join("bench.csv"), &rows_to_csv(&rows))?;
    print!("{}", rows_to_text(&rows));
    Ok(())
}

fn cmd_backtest(args: &BacktestArgs) -> Result<(), Failure> {
    let cfg = load_config(args.common.config.as_deref())?;
    let data = require_data(&args.common, &cfg)?;
    let strategies = match (&args.strategies, &cfg.strategies) {
        (Some(spec), _) => parse_method_list(spec)?,
        (None, Some(names)) => method_names_to_list(names)?,
        (None, None) => parse_method_list("minv,minmad,volrp,madrp,ew")?,
    };
    for (k, m) in strategies.iter().enumerate() {
        if strategies[..k].contains(m) {
            return Err(Failure::Usage(format!(
                "strategy {m} listed twice (aliases name the same strategy)"
            )));
        }
    }
    let rolling = RollingConfig {
        in_sample_days: args.in_sample.or(cfg.in_sample).unwrap_or(250),
        out_sample_days: args.out_sample.or(cfg.out_sample).unwrap_or(20),
        rebalance_days: args.rebalance.or(cfg.rebalance).unwrap_or(20),
        annualization_factor: args.annualization.or(cfg.annualization).unwrap_or(250),
        risk_free: args.risk_free.or(cfg.risk_free).unwrap_or(0.0),
    };
    let opts = solve_options(&args.common, &cfg);
    let dir = out_dir(args.common.out_dir.as_deref(), &cfg);

    let (series, _) = load_market(&data, &csv_layout(&args.common))?;
    let mut results: Vec<BacktestResult> = Vec::new();
    for &m in &strategies {
        let res = run_backtest(&series, m, &opts, &rolling)?;
        let json = serde_json::to_string_pretty(&res)
            .map_err(|e| Failure::Run(Error::Config(format!("result serialization: {e}"))))?;
        write_file(&dir.join(format!("backtest_{m}.json")), &(json + "\n"))?;
        results.push(res);
    }

    let metric_rows: Vec<(String, MetricSet)> = results
        .iter()
        .map(|r| (r.strategy.to_string(), r.metrics.clone()))
        .collect();
    write_file(&dir.join("metrics.csv"), &metrics_to_csv(&metric_rows))?;
    let refs: Vec<&BacktestResult> = results.iter().collect();
    write_file(&dir.join("wealth.csv"), &wealth_to_csv(&refs)?)?;
    print!("{}", metrics_to_text(&metric_rows, &rolling));
    Ok(())
}

/// Default comonotone factor scales: strictly increasing in the asset index
/// and small enough that every generated return stays above -1, so the
/// compounded price path is always positive.
pub fn default_scales(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.1 * (i + 1) as f64 / n as f64).collect()
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let kind = args
        .kind
        .clone()
        .or_else(|| cfg.kind.clone())
        .ok_or_else(|| Failure::Usage("no kind: pass --kind comonotone|random".into()))?;
    let n = args
        .n
        .or(cfg.n)
        .ok_or_else(|| Failure::Usage("no asset count: pass --n".into()))?;
    let t = args
        .t
        .or(cfg.t)
        .ok_or_else(|| Failure::Usage("no day count: pass --t".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);

    let scales: Option<Vec<f64>> = match (&args.scales, &cfg.scales) {
        (Some(spec), _) => {
            let parsed: Result<Vec<f64>, _> =
                spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
            Some(parsed.map_err(|e| Failure::Usage(format!("scales: {e}")))?)
        }
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };

    let scn = match kind.as_str() {
        "comonotone" => {
            let scales = scales.unwrap_or_else(|| default_scales(n));
            if scales.len() != n {
                return Err(Failure::Usage(format!(
                    "{} scales for {n} assets",
                    scales.len()
                )));
            }
            if scales.iter().any(|&s| !(s.abs() * 8.0 < 1.0)) {
                return Err(Failure::Usage(
                    "factor scales must satisfy 8*|scale| < 1 so prices stay positive".into(),
                ));
            }
            synth_comonotone(n, t, &scales, seed)?
        }
        "random" => {
            if scales.is_some() {
                return Err(Failure::Usage(
                    "scales apply only to --kind comonotone".into(),
                ));
            }
            synth_random(n, t, seed)?
        }
        other => {
            return Err(Failure::Usage(format!(
                "kind must be \"comonotone\" or \"random\", got \"{other}\""
            )))
        }
    };

    let ids: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
    let series = prices_from_returns(&scn, ids.clone(), 100.0)?;
    let dates: Vec<String> = (0..series.n_days()).map(|d| format!("d{d:04}")).collect();
    let series = PriceSeries::new(ids, series.prices().clone(), Some(dates))?;

    let path = match &args.out {
        Some(p) => p.clone(),
        None => out_dir(args.out_dir.as_deref(), &cfg)
            .join(format!("synth_{kind}_n{n}_t{t}_seed{seed}.csv")),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Failure::Run(Error::Io(e)))?;
        }
    }
    write_csv(&series, &path, &CsvLayout::default())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Dispatches one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Backtest(a) => cmd_backtest(a),
        Cmd::Synth(a) => cmd_synth(a),
    }
}
