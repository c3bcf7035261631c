//! Command-line front end: `test`, `estimate-bandwidth`, `simulate` and `diagnose`.
//!
//! Every command prints one report echoing its configuration and seed.
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical degeneracy.

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bandwidth::{estimate_bandwidth, BandwidthConfig};
use crate::datagen::{Distribution, Setting};
use crate::error::{Error, Result};
use crate::harness::{
    run_bandwidth_experiment, run_diagnostic_experiment, run_power_experiment, run_size_experiment,
    trace_ratio_diagnostic, DiagnosticConfig, ExperimentConfig, ExperimentReport, GridPoint, ModelSpec, SCHEMA_VERSION,
};
use crate::hypothesis::{sweep_tests, BandwidthTests, OrderSet, UStatResult};
use crate::sample::{BandSpec, SampleMatrix};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bandcov", version, about = "Adaptive tests and bandwidth estimation for banded covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Master seed; drawn from entropy and reported when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test H0: Sigma is k-banded, at one bandwidth or a range.
    Test(TestArgs),
    /// Estimate the bandwidth of the covariance matrix.
    EstimateBandwidth(BandwidthArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Trace-ratio diagnostic on data or on the simulated lower-band model.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Min,
    Fisher,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// CSV file, rows are samples and columns variables.
    pub input: PathBuf,
    #[arg(long, conflicts_with = "k_sweep", required_unless_present = "k_sweep")]
    pub k: Option<usize>,
    /// Inclusive bandwidth range `LO:HI`.
    #[arg(long)]
    pub k_sweep: Option<String>,
    /// Comma-separated orders.
    #[arg(long, default_value = "1,2,3,4,5,6")]
    pub orders: String,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    pub method: MethodArg,
}

#[derive(Debug, Args, Serialize)]
pub struct BandwidthArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.06)]
    pub theta: f64,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value = "1,2,3,4,5,6")]
    pub orders: String,
    /// Compute every difference up to `k_max`.
    #[arg(long)]
    pub full_trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentArg {
    Size,
    Power,
    Bandwidth,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Defaults to `bandwidth` for M1-M4 and `size` otherwise (`power` when `--rho-grid` is given).
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentArg>,
    /// Experiment configuration as JSON; replaces the model flags.
    #[arg(long, conflicts_with_all = ["setting", "n", "p", "rho", "sparsity", "a_offset", "rho_grid", "distribution"])]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "S1")]
    pub setting: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 0)]
    pub a_offset: usize,
    /// Comma-separated signal sizes for a power grid.
    #[arg(long)]
    pub rho_grid: Option<String>,
    #[arg(long, default_value = "normal")]
    pub distribution: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "1,2,3,4,5,6")]
    pub orders: String,
    /// Bandwidth under test; defaults to the setting's null bandwidth.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.06)]
    pub theta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// CSV data; omit to simulate the lower-band model.
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 157)]
    pub n: usize,
    #[arg(long, default_value_t = 218)]
    pub p: usize,
    #[arg(long, default_value_t = 200)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidOrder { .. } | Error::InvalidPValue(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Machine-readable error object.
pub fn error_object(kind: &str, message: &str, code: i32) -> Value {
    json!({ "error": { "kind": kind, "message": message, "exit_code": code } })
}

/// Formats a p-value with four significant digits.
pub fn format_p(p: f64) -> String {
    if p < 1e-300 {
        "<1e-300".into()
    } else {
        format!("{p:.3e}")
    }
}

/// Parses CSV text: rows are samples, columns variables, an optional non-numeric header row.
pub fn parse_csv<R: Read>(reader: R) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidData(e.to_string()))?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if index == 0 && rows.is_empty() && parsed.iter().any(|v| v.is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow { row: line, expected, found: record.len() });
        }
        let mut row = Vec::with_capacity(expected);
        for (col, (v, cell)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match v {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        row: line,
                        col: col + 1,
                        message: format!("not a finite number: {cell:?}"),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    SampleMatrix::from_rows(&rows)
}

pub fn read_csv(path: &Path) -> Result<SampleMatrix> {
    parse_csv(std::fs::File::open(path)?)
}

fn parse_orders(s: &str) -> Result<OrderSet> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidParameter(format!("bad order {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    OrderSet::new(v)
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("bandwidth range must be LO:HI, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number {t:?}"))))
        .collect()
}

/// A command's result in all three output shapes.
struct Output {
    result: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn render(format: Format, command: &str, seed: u64, config: Value, out: Output) -> String {
    match format {
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "seed": seed,
                "config": config,
                "result": out.result,
            });
            serde_json::to_string_pretty(&report).unwrap() + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&out.header).unwrap();
            for r in &out.rows {
                w.write_record(r).unwrap();
            }
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
        Format::Table => {
            let mut widths: Vec<usize> = out.header.iter().map(|h| h.len()).collect();
            for r in &out.rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    + "\n"
            };
            let mut s = format!("# {command}  seed={seed}\n");
            s += &line(out.header.clone());
            for r in &out.rows {
                s += &line(r.iter().map(String::as_str).collect());
            }
            s
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn test_rows(t: &BandwidthTests, method: MethodArg) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = t
        .per_order
        .iter()
        .map(|r: &UStatResult| {
            vec![
                t.k.to_string(),
                format!("U{}", r.order),
                format!("{:.6e}", r.value),
                format!("{:.6e}", r.variance),
                format!("{:.4}", r.z),
                format_p(r.p_value),
            ]
        })
        .collect();
    let blanks = |name: &str, p: f64| vec![t.k.to_string(), name.into(), String::new(), String::new(), String::new(), format_p(p)];
    if method != MethodArg::Fisher {
        rows.push(blanks("adpUmin", t.min.combined_p));
    }
    if method != MethodArg::Min {
        rows.push(blanks("adpUf", t.fisher.combined_p));
    }
    rows
}

fn test_value(t: &BandwidthTests, method: MethodArg) -> Value {
    let mut v = json!({ "k": t.k, "per_order": to_value(&t.per_order) });
    if method != MethodArg::Fisher {
        v["adpUmin"] = json!({ "p_value": t.min.combined_p, "argmin_order": t.min.argmin_order });
    }
    if method != MethodArg::Min {
        v["adpUf"] = json!({ "p_value": t.fisher.combined_p, "statistic": t.fisher.fisher_t, "clamped": t.fisher.clamped });
    }
    v
}

fn cmd_test(args: &TestArgs) -> Result<Output> {
    let orders = parse_orders(&args.orders)?;
    let x = read_csv(&args.input)?;
    let (lo, hi) = match (&args.k_sweep, args.k) {
        (Some(r), _) => parse_range(r)?,
        (None, Some(k)) => (k, k),
        (None, None) => return Err(Error::InvalidParameter("one of --k or --k-sweep is required".into())),
    };
    for k in [lo, hi] {
        BandSpec::new(k, x.p())?.require_testable()?;
    }
    let sweep = sweep_tests(&x, &orders, lo, hi)?;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for t in &sweep {
        rows.extend(test_rows(t, args.method));
        values.push(test_value(t, args.method));
    }
    let result = if args.k_sweep.is_some() {
        json!({ "n": x.n(), "p": x.p(), "sweep": values })
    } else {
        let mut v = values.pop().unwrap();
        v["n"] = json!(x.n());
        v["p"] = json!(x.p());
        v
    };
    Ok(Output {
        result,
        header: vec!["k", "method", "statistic", "variance", "z", "p_value"],
        rows,
    })
}

fn cmd_estimate_bandwidth(args: &BandwidthArgs) -> Result<Output> {
    let orders = parse_orders(&args.orders)?;
    let x = read_csv(&args.input)?;
    let cfg = BandwidthConfig {
        delta: args.delta,
        theta: args.theta,
        k_max: args.k_max,
        full_trace: args.full_trace,
    };
    let r = estimate_bandwidth(&x, &orders, &cfg)?;
    let mut rows: Vec<Vec<String>> = r
        .per_order
        .iter()
        .map(|o| {
            vec![
                format!("U{}", o.order),
                o.estimate.map_or("undefined".into(), |k| k.to_string()),
                o.saturated.to_string(),
            ]
        })
        .collect();
    rows.push(vec!["combined".into(), r.combined.to_string(), String::new()]);
    Ok(Output {
        result: to_value(&r),
        header: vec!["order", "estimate", "saturated"],
        rows,
    })
}

fn experiment_config(args: &SimulateArgs, seed: u64) -> Result<(ExperimentConfig, ExperimentArg)> {
    let orders = parse_orders(&args.orders)?;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.master_seed = seed;
        let kind = args.experiment.unwrap_or(if cfg.grid.is_some() {
            ExperimentArg::Power
        } else if cfg.bandwidth.is_some() {
            ExperimentArg::Bandwidth
        } else {
            ExperimentArg::Size
        });
        return Ok((cfg, kind));
    }
    let setting: Setting = args.setting.parse()?;
    let distribution: Distribution = args.distribution.parse()?;
    let model = ModelSpec {
        setting,
        p: args.p,
        distribution,
        rho: args.rho,
        sparsity: args.sparsity,
        a_offset: args.a_offset,
    };
    let mut cfg = ExperimentConfig::new(model, args.n, args.reps, seed);
    cfg.alpha = args.alpha;
    cfg.orders = orders;
    cfg.k = args.k;
    let kind = args.experiment.unwrap_or(match (setting, &args.rho_grid) {
        (_, Some(_)) => ExperimentArg::Power,
        (Setting::M1 | Setting::M2 | Setting::M3 | Setting::M4, None) => ExperimentArg::Bandwidth,
        _ => ExperimentArg::Size,
    });
    if let Some(g) = &args.rho_grid {
        cfg.grid = Some(
            parse_list(g)?
                .into_iter()
                .map(|rho| GridPoint { rho, sparsity: args.sparsity, a_offset: args.a_offset })
                .collect(),
        );
    }
    if kind == ExperimentArg::Bandwidth {
        cfg.bandwidth = Some(BandwidthConfig { delta: args.delta, theta: args.theta, ..Default::default() });
    }
    Ok((cfg, kind))
}

fn report_rows(r: &ExperimentReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    if let Some(b) = &r.bandwidth {
        return (
            vec!["true_bandwidth", "mean_bias", "sd_bias", "exact_recovery", "failures"],
            vec![vec![
                b.true_bandwidth.to_string(),
                format!("{:.4}", b.mean_bias),
                format!("{:.4}", b.sd_bias),
                format!("{:.4}", b.exact_recovery),
                r.failure_count.to_string(),
            ]],
        );
    }
    let rows = r
        .rates
        .iter()
        .map(|row| {
            vec![
                row.test.to_string(),
                row.point.map_or(String::new(), |g| g.rho.to_string()),
                row.rejections.to_string(),
                row.replications.to_string(),
                format!("{:.4}", row.rate),
                format!("{:.4}", row.mc_se),
            ]
        })
        .collect();
    (vec!["test", "rho", "rejections", "replications", "rate", "mc_se"], rows)
}

fn cmd_simulate(args: &SimulateArgs, seed: u64) -> Result<(Output, Value)> {
    let (cfg, kind) = experiment_config(args, seed)?;
    let report = match kind {
        ExperimentArg::Size => run_size_experiment(&cfg)?,
        ExperimentArg::Power => run_power_experiment(&cfg)?,
        ExperimentArg::Bandwidth => run_bandwidth_experiment(&cfg)?,
    };
    let (header, rows) = report_rows(&report);
    Ok((Output { result: to_value(&report), header, rows }, to_value(&cfg)))
}

fn cmd_diagnose(args: &DiagnoseArgs, seed: u64) -> Result<Output> {
    let header = vec!["source", "population_ratio", "sample_ratio", "sd"];
    if let Some(path) = &args.input {
        let x = read_csv(path)?;
        let ratio = trace_ratio_diagnostic(&x)?;
        return Ok(Output {
            result: json!({ "n": x.n(), "p": x.p(), "ratio": ratio }),
            header,
            rows: vec![vec!["data".into(), String::new(), format!("{ratio:.6}"), String::new()]],
        });
    }
    let cfg = DiagnosticConfig {
        n: args.n,
        p: args.p,
        k: args.k,
        replications: args.reps,
        ..DiagnosticConfig::case_two(args.reps, seed)
    };
    let (summary, elapsed) = run_diagnostic_experiment(&cfg)?;
    let row = vec![
        "simulated".into(),
        format!("{:.6}", summary.population_ratio),
        format!("{:.6}", summary.mean_sample_ratio),
        format!("{:.6}", summary.sd_sample_ratio),
    ];
    let mut result = to_value(&summary);
    result["config"] = to_value(&cfg);
    result["elapsed_seconds"] = json!(elapsed);
    Ok(Output { result, header, rows: vec![row] })
}

/// Runs the CLI on `args`, writing the report to stdout; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprint!("{e}");
            println!("{}", error_object("Usage", e.to_string().trim(), EXIT_USAGE));
            return EXIT_USAGE;
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            println!("{}", error_object("Usage", "--threads must be at least 1", EXIT_USAGE));
            return EXIT_USAGE;
        }
        // A global pool may already exist when embedded; the cap is then best effort.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let seed = cli.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    });
    let (name, outcome) = match &cli.command {
        Command::Test(a) => ("test", cmd_test(a).map(|o| (o, to_value(a)))),
        Command::EstimateBandwidth(a) => ("estimate-bandwidth", cmd_estimate_bandwidth(a).map(|o| (o, to_value(a)))),
        Command::Simulate(a) => ("simulate", cmd_simulate(a, seed)),
        Command::Diagnose(a) => ("diagnose", cmd_diagnose(a, seed).map(|o| (o, to_value(a)))),
    };
    match outcome {
        Ok((out, config)) => {
            print!("{}", render(cli.format, name, seed, config, out));
            EXIT_OK
        }
        Err(e) => {
            let code = exit_code(&e);
            println!("{}", error_object(e.kind(), &e.to_string(), code));
            code
        }
    }
}
