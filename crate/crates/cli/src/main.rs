//! `egpr` — command-line surface for the forecasting toolkit: dataset
//! generation, single forecasts, three-way method comparisons and covariance
//! diagnostics, all emitting plot-ready CSV/JSON.

use std::collections::HashMap;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use egpr_core::baselines::BaselineError;
use egpr_core::egpr::{EgprConfig, EgprError, WEEK_ANCHOR};
use egpr_core::eval::{method_forecast, run_comparison, EvalError, MethodKind, MethodOutcome};
use egpr_core::gp::GpError;
use egpr_core::stats::{covariance_of_rows, eigenspectrum, export_covariance, StatsError};
use egpr_core::synth::{export_dataset, generate_dispatch, generate_load, SynthConfig, SynthError};
use egpr_core::timeseries::{
    ingest_csv, slice_weeks, week_start_index, DayOfWeek, HourlyTimeseries, TimeseriesError,
    WindowLayout, DAY_HOURS, WEEK_HOURS,
};

/// Exit 1: bad flags or config. Exit 2: unreadable or inconsistent data.
/// Exit 3: numerical failure inside a fit or factorization.
#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<TimeseriesError> for CliError {
    fn from(e: TimeseriesError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<EgprError> for CliError {
    fn from(e: EgprError) -> Self {
        match e {
            EgprError::Gp(g) => CliError::Numerical(g.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::SingularRegression { .. } | BaselineError::Gp(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Egpr(inner) => inner.into(),
            EvalError::Baseline(inner) => inner.into(),
            EvalError::Timeseries(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "egpr",
    about = "Week-ahead load forecasting: ensemble GPR with standard-GPR and ARIMA baselines",
    version
)]
struct Cli {
    /// Config file with `key=value` lines mirroring the long flag names.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic load + dispatch dataset CSV.
    Generate(GenerateArgs),
    /// Forecast one target week with one method.
    Forecast(ForecastArgs),
    /// Compare methods across target weeks; writes JSON plus per-method CSVs.
    Compare(CompareArgs),
    /// Eigenvalue spectrum of the weekly ensemble covariance.
    Spectrum(SpectrumArgs),
    /// Dense weekly ensemble covariance matrix.
    Covariance(CovarianceArgs),
    /// Print the index ↔ day-range mapping of aligned weeks in a dataset.
    ListWeeks(ListWeeksArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    peak_load: Option<f64>,
    #[arg(long)]
    generators: Option<usize>,
    #[arg(long)]
    monday_decorrelation: Option<f64>,
    #[arg(long)]
    daily_shape_noise: Option<f64>,
    #[arg(long)]
    seasonal_amplitude: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Column name inside the dataset CSV (e.g. total_load, gen_5).
    #[arg(long)]
    series: Option<String>,
    /// Day of week of the first data row.
    #[arg(long)]
    start_day: Option<DayOfWeek>,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    /// 0-based aligned-week index.
    #[arg(long)]
    week: Option<usize>,
    #[arg(long)]
    layout: Option<String>,
    /// Ensemble size (EGPR only); defaults to 20 for the monday layout, 10
    /// otherwise.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    method: Option<MethodKind>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated 0-based week indices.
    #[arg(long)]
    weeks: Option<String>,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated subset of egpr,gpr-se,arima; defaults to all three.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    week: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Restrict the ensemble windows to hours 25..=168 (drop Monday).
    #[arg(long)]
    exclude_monday: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovarianceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    week: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ListWeeksArgs {
    #[command(flatten)]
    data: DataArgs,
}

/// Key=value pairs loaded from `--config`, consulted for any flag not given
/// on the command line.
struct Config(HashMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!(
                        "config line {} is not `key=value`: `{line}`",
                        lineno + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    /// Flag value > config value > default; missing everywhere is an error.
    fn get<T>(&self, key: &str, flag: Option<T>, default: Option<T>) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.0.get(key) {
            return raw.parse().map_err(|e| {
                CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}"))
            });
        }
        default.ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }
}

fn parse_layout(s: &str) -> Result<WindowLayout, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "monday" => Ok(WindowLayout::monday()),
        "tuesday" => Ok(WindowLayout::tuesday()),
        other => Err(CliError::Usage(format!(
            "unknown layout `{other}` (expected monday or tuesday)"
        ))),
    }
}

fn parse_weeks(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid week index `{w}`")))
        })
        .collect()
}

fn parse_methods(s: &str) -> Result<Vec<MethodKind>, CliError> {
    s.split(',')
        .map(|m| MethodKind::from_str(m.trim()).map_err(CliError::Usage))
        .collect()
}

fn load_series(cfg: &Config, args: &DataArgs) -> Result<HourlyTimeseries, CliError> {
    let data: PathBuf = cfg.get("data", args.data.clone(), None)?;
    let series: String = cfg.get("series", args.series.clone(), None)?;
    let start_day = cfg.get("start-day", args.start_day, Some(DayOfWeek::Monday))?;
    Ok(ingest_csv(&data, &series, start_day)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn cmd_generate(cfg: &Config, args: &GenerateArgs) -> Result<(), CliError> {
    let defaults = SynthConfig::default();
    let synth = SynthConfig {
        seed: cfg.get("seed", args.seed, Some(defaults.seed))?,
        days: cfg.get("days", args.days, Some(defaults.days))?,
        peak_load: cfg.get("peak-load", args.peak_load, Some(defaults.peak_load))?,
        n_generators: cfg.get("generators", args.generators, Some(defaults.n_generators))?,
        monday_decorrelation: cfg.get(
            "monday-decorrelation",
            args.monday_decorrelation,
            Some(defaults.monday_decorrelation),
        )?,
        daily_shape_noise: cfg.get(
            "daily-shape-noise",
            args.daily_shape_noise,
            Some(defaults.daily_shape_noise),
        )?,
        seasonal_amplitude: cfg.get(
            "seasonal-amplitude",
            args.seasonal_amplitude,
            Some(defaults.seasonal_amplitude),
        )?,
    };
    let out: PathBuf = cfg.get("out", args.out.clone(), None)?;
    let load = generate_load(&synth)?;
    let dispatch = generate_dispatch(&load, &synth)?;
    export_dataset(&load, &dispatch, &out)?;
    println!(
        "wrote {} ({} hours, {} generators)",
        out.display(),
        load.len(),
        dispatch.len()
    );
    Ok(())
}

fn forecast_csv(
    record: &egpr_core::eval::MethodRecord,
    fcst_hours: &[usize],
    reference: &[f64],
) -> String {
    let mut out = String::from("hour,mean,std,prior_mean,reference\n");
    for (i, h) in fcst_hours.iter().enumerate() {
        let std = match &record.std {
            Some(s) => format!("{}", s[i]),
            None => String::new(),
        };
        out.push_str(&format!(
            "{h},{},{std},{},{}\n",
            record.mean[i], record.prior_mean[i], reference[i]
        ));
    }
    out
}

fn cmd_forecast(cfg: &Config, args: &ForecastArgs) -> Result<(), CliError> {
    let ts = load_series(cfg, &args.data)?;
    let week: usize = cfg.get("week", args.week, None)?;
    let layout = parse_layout(&cfg.get::<String>("layout", args.layout.clone(), None)?)?;
    let method: MethodKind = cfg.get("method", args.method, None)?;
    let n = match cfg.get::<usize>("n", args.n, Some(0))? {
        0 => None,
        n => Some(n),
    };
    let out: PathBuf = cfg.get("out", args.out.clone(), None)?;

    let record = method_forecast(&ts, week, layout, n, method)?;
    let weeks = slice_weeks(&ts, WEEK_ANCHOR)?;
    let (_, reference) = egpr_core::timeseries::extract_window(&weeks[week], &layout)?;
    write_file(&out, &forecast_csv(&record, &layout.fcst_hours(), &reference))?;
    println!(
        "wrote {} (week {week}, {method}, MAPE {:.3}%)",
        out.display(),
        record.mape
    );
    Ok(())
}

fn cmd_compare(cfg: &Config, args: &CompareArgs) -> Result<(), CliError> {
    let ts = load_series(cfg, &args.data)?;
    let weeks = parse_weeks(&cfg.get::<String>("weeks", args.weeks.clone(), None)?)?;
    let layout = parse_layout(&cfg.get::<String>("layout", args.layout.clone(), None)?)?;
    let methods = match cfg.get::<String>("methods", args.methods.clone(), Some(String::new()))? {
        s if s.is_empty() => MethodKind::ALL.to_vec(),
        s => parse_methods(&s)?,
    };
    let n = match cfg.get::<usize>("n", args.n, Some(0))? {
        0 => None,
        n => Some(n),
    };
    let out: PathBuf = cfg.get("out", args.out.clone(), None)?;

    let reports = run_comparison(&ts, &weeks, &[layout], &methods, n)?;
    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| CliError::Data(format!("cannot serialize report: {e}")))?;
    write_file(&out, &json)?;

    // one forecast CSV per successful (week, method) cell, next to the JSON
    let stem = out.with_extension("");
    let stem = stem.to_string_lossy();
    for report in &reports {
        for (name, outcome) in &report.methods {
            if let MethodOutcome::Success { record } = outcome {
                let path = PathBuf::from(format!("{stem}-week{}-{name}.csv", report.target_week));
                write_file(
                    &path,
                    &forecast_csv(record, &report.fcst_hours, &report.reference),
                )?;
            }
        }
    }
    println!("wrote {} ({} reports)", out.display(), reports.len());
    Ok(())
}

/// Ensemble of the `n` aligned weeks preceding `week`, as a matrix of either
/// full weeks or Tue–Sun windows.
fn ensemble_rows(
    ts: &HourlyTimeseries,
    week: usize,
    n: usize,
    exclude_monday: bool,
) -> Result<egpr_core::nalgebra::DMatrix<f64>, CliError> {
    let cfg = EgprConfig::new(WindowLayout::monday()).with_ensemble_size(n);
    let ens = egpr_core::egpr::build_ensemble(ts, week, &cfg)?;
    // build_ensemble returns obs+fcst = the full 168 hours for the monday
    // layout; drop the first 24 columns for the Tue–Sun view
    let data = ens.data();
    let skip = if exclude_monday { DAY_HOURS } else { 0 };
    Ok(data.columns(skip, WEEK_HOURS - skip).into())
}

fn cmd_spectrum(cfg: &Config, args: &SpectrumArgs) -> Result<(), CliError> {
    let ts = load_series(cfg, &args.data)?;
    let week: usize = cfg.get("week", args.week, None)?;
    let n: usize = cfg.get("n", args.n, Some(20))?;
    let exclude = cfg.get("exclude-monday", args.exclude_monday, Some(false))?;
    let out: PathBuf = cfg.get("out", args.out.clone(), None)?;

    let rows = ensemble_rows(&ts, week, n, exclude)?;
    let cov = covariance_of_rows(&rows);
    let eigs = eigenspectrum(&cov).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut text = String::from("rank,eigenvalue\n");
    for (i, e) in eigs.iter().enumerate() {
        text.push_str(&format!("{},{}\n", i + 1, e));
    }
    write_file(&out, &text)?;
    println!("wrote {} ({} eigenvalues)", out.display(), eigs.len());
    Ok(())
}

fn cmd_covariance(cfg: &Config, args: &CovarianceArgs) -> Result<(), CliError> {
    let ts = load_series(cfg, &args.data)?;
    let week: usize = cfg.get("week", args.week, None)?;
    let n: usize = cfg.get("n", args.n, Some(20))?;
    let out: PathBuf = cfg.get("out", args.out.clone(), None)?;

    let rows = ensemble_rows(&ts, week, n, false)?;
    let cov = covariance_of_rows(&rows);
    export_covariance(&cov, &out)?;
    println!("wrote {} ({}x{})", out.display(), cov.nrows(), cov.ncols());
    Ok(())
}

fn cmd_list_weeks(cfg: &Config, args: &ListWeeksArgs) -> Result<(), CliError> {
    let ts = load_series(cfg, &args.data)?;
    let weeks = slice_weeks(&ts, WEEK_ANCHOR)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "week,start_hour,end_hour,start_day,end_day").ok();
    for w in 0..weeks.len() {
        let start = week_start_index(&ts, WEEK_ANCHOR, w);
        let end = start + WEEK_HOURS - 1;
        writeln!(
            stdout,
            "{w},{start},{end},{},{}",
            ts.day_of_week(start),
            ts.day_of_week(end)
        )
        .ok();
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(args) => cmd_generate(&cfg, args),
        Command::Forecast(args) => cmd_forecast(&cfg, args),
        Command::Compare(args) => cmd_compare(&cfg, args),
        Command::Spectrum(args) => cmd_spectrum(&cfg, args),
        Command::Covariance(args) => cmd_covariance(&cfg, args),
        Command::ListWeeks(args) => cmd_list_weeks(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
