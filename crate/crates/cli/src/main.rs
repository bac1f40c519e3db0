//! `wf`: density evaluation, Fisher operators, Van Trees bounds and the
//! verification suite from the command line.
//!
//! Exit codes: 0 success, 1 verification failures, 2 invalid input, 3 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use wishart_fisher::mcverify::{run_verification_suite, simulate_estimator, EstimatorSpec, Scope};
use wishart_fisher::{van_trees_bound, DenseOperator, McConfig, ModelParams, SymMatrix, VanTreesProblem, WishartParams};

#[derive(Debug)]
enum CliError {
    Input(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<wishart_fisher::Error> for CliError {
    fn from(e: wishart_fisher::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "wf", version, about = "Fisher information and Van Trees bounds for the Wishart-randomised Gaussian model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the model density (or log density) at a point.
    Density(DensityArgs),
    /// Write the Fisher information operator or its inverse.
    Fisher(FisherArgs),
    /// Compute the Van Trees bound, optionally simulating an estimator against it.
    Vantrees(VanTreesArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// JSON matrix file or "identity".
    #[arg(long)]
    sigma: Option<String>,
    /// Comma-separated coordinates or a file containing them.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long)]
    log: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat JSON object with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct FisherArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, overrides_with = "no_inverse")]
    inverse: bool,
    #[arg(long, overrides_with = "inverse")]
    no_inverse: bool,
    #[arg(long)]
    dense: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum EstimatorKind {
    Constant,
    Clipped,
}

#[derive(Args)]
struct VanTreesArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    sigma1: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    simulate: Option<EstimatorKind>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    #[arg(long)]
    full: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return report_error(e);
    }
    let result = match cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Fisher(a) => cmd_fisher(a),
        Command::Vantrees(a) => cmd_vantrees(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> ExitCode {
    match &e {
        CliError::Input(m) => eprintln!("error: {m}"),
        CliError::Io(m) => eprintln!("I/O error: {m}"),
    }
    ExitCode::from(e.code())
}

/// `WF_THREADS` caps the worker pool. Results do not depend on it.
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("WF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("WF_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size worker pool: {e}")))
}

// ---------------------------------------------------------------------------
// configuration

/// Flag values merged over an optional flat JSON config file.
struct Settings {
    file: Map<String, Value>,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = read_text(p)?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(CliError::Input(format!("{}: config must be a JSON object", p.display()))),
                    Err(e) => return Err(CliError::Input(format!("{}: {e}", p.display()))),
                }
            }
        };
        Ok(Self { file })
    }

    fn optional<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Input(format!("config key {key:?}: {e}"))),
        }
    }

    fn required<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.optional(flag, key)?
            .ok_or_else(|| CliError::Input(format!("missing required flag --{key}")))
    }

    fn switch(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.optional(None, key)?.unwrap_or(false))
    }

    /// A matrix given as a flag (path or "identity") or as a config value
    /// (path, "identity", rows, or `{"n", "rows"}`).
    fn matrix(&self, flag: Option<String>, key: &str, n: usize) -> CliResult<SymMatrix<f64>> {
        let value = match flag {
            Some(s) => Value::String(s),
            None => self
                .file
                .get(key)
                .cloned()
                .ok_or_else(|| CliError::Input(format!("missing required flag --{key}")))?,
        };
        let m = match value {
            Value::String(s) if s == "identity" => SymMatrix::identity(n),
            Value::String(path) => {
                let text = read_text(Path::new(&path))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
                matrix_from_value(&v).map_err(|e| CliError::Input(format!("{path}: {e}")))?
            }
            other => matrix_from_value(&other).map_err(|e| CliError::Input(format!("config key {key:?}: {e}")))?,
        };
        if m.order() != n {
            return Err(CliError::Input(format!("--{key} has order {} but --n is {n}", m.order())));
        }
        Ok(m)
    }

    /// A vector given as comma-separated literals, a file holding them, or a JSON array in the config.
    fn vector(&self, flag: Option<String>, key: &str) -> CliResult<Vec<f64>> {
        if flag.is_none() {
            if let Some(Value::Array(items)) = self.file.get(key) {
                return items
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| CliError::Input(format!("config key {key:?} must hold numbers"))))
                    .collect();
            }
        }
        let raw: String = self.required(flag, key)?;
        if let Some(v) = parse_list(&raw) {
            return Ok(v);
        }
        let text = read_text(Path::new(&raw))?;
        if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
            return Ok(v);
        }
        parse_list(text.trim()).ok_or_else(|| CliError::Input(format!("{raw}: expected comma-separated numbers")))
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().ok()).collect()
}

fn matrix_from_value(v: &Value) -> Result<SymMatrix<f64>, String> {
    let obj = match v {
        Value::Array(rows) => json!({ "n": rows.len(), "rows": rows }),
        other => other.clone(),
    };
    serde_json::from_value(obj).map_err(|e| e.to_string())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `{"command", "config", "result"}`. The config holds every resolved
/// input (matrices inline), so `--config` on it replays the run.
fn write_artifact(path: &Path, command: &str, config: &Value, result: &Value) -> CliResult<()> {
    let doc = json!({ "command": command, "config": config, "result": result });
    write_text(path, &to_pretty(&doc))
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn require_order(n: usize) -> CliResult<usize> {
    if n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    Ok(n)
}

/// `printf("%.15g")`.
fn format_g15(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.14e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (14 - exp) as usize, x))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// commands

fn cmd_density(a: DensityArgs) -> CliResult<u8> {
    let cfg = Settings::load(a.config.as_deref())?;
    let n = require_order(cfg.required(a.n, "n")?)?;
    let p: f64 = cfg.required(a.p, "p")?;
    let sigma = cfg.matrix(a.sigma, "sigma", n)?;
    let x = cfg.vector(a.x, "x")?;
    let log = cfg.switch(a.log, "log")?;
    let out = cfg.optional(a.out, "out")?;
    if x.len() != n {
        return Err(CliError::Input(format!("--x has {} coordinates but --n is {n}", x.len())));
    }
    let model = ModelParams::new(p, sigma.clone())?;
    let value = if log { model.log_density(&x)? } else { model.density(&x)? };
    println!("{}", format_g15(value));
    if let Some(path) = out {
        let config = json!({ "n": n, "p": p, "sigma": sigma.rows(), "x": x, "log": log });
        let key = if log { "log_density" } else { "density" };
        write_artifact(&path, "density", &config, &json!({ key: value }))?;
    }
    Ok(0)
}

fn csv_of(op: &DenseOperator<f64>) -> String {
    let labels: Vec<String> = wishart_fisher::symspace::basis_pairs(op.order())
        .into_iter()
        .map(|(i, j)| format!("e{i}{j}"))
        .collect();
    let mut s = format!("basis,{}\n", labels.join(","));
    for (label, row) in labels.iter().zip(op.rows()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("{label},{}\n", cells.join(",")));
    }
    s
}

fn cmd_fisher(a: FisherArgs) -> CliResult<u8> {
    let cfg = Settings::load(a.config.as_deref())?;
    let n = require_order(cfg.required(a.n, "n")?)?;
    let p: f64 = cfg.required(a.p, "p")?;
    let sigma = cfg.matrix(a.sigma, "sigma", n)?;
    let inverse = if a.no_inverse { false } else { cfg.switch(a.inverse, "inverse")? };
    let dense = cfg.switch(a.dense, "dense")?;
    let format = cfg.optional(a.format, "format")?.unwrap_or(Format::Json);
    let out = cfg.optional(a.out, "out")?;

    let model = ModelParams::new(p, sigma.clone())?;
    let op = if inverse { model.fisher_inverse() } else { model.fisher_information() };
    let dense_op = op.to_dense();
    let mut result = json!({ "operator": op });
    if dense {
        result["dense"] = json!(dense_op.rows());
    }
    let config = json!({
        "n": n, "p": p, "sigma": sigma.rows(), "inverse": inverse, "dense": dense, "format": format,
    });
    match (format, out) {
        (Format::Json, Some(path)) => write_artifact(&path, "fisher", &config, &result)?,
        (Format::Json, None) => print!("{}", to_pretty(&result)),
        (Format::Csv, Some(path)) => {
            write_text(&path, &csv_of(&dense_op))?;
            let mut side = path.into_os_string();
            side.push(".json");
            write_artifact(Path::new(&side), "fisher", &config, &result)?;
        }
        (Format::Csv, None) => print!("{}", csv_of(&dense_op)),
    }
    Ok(0)
}

fn cmd_vantrees(a: VanTreesArgs) -> CliResult<u8> {
    let cfg = Settings::load(a.config.as_deref())?;
    let n = require_order(cfg.required(a.n, "n")?)?;
    let p: f64 = cfg.required(a.p, "p")?;
    let p1: f64 = cfg.required(a.p1, "p1")?;
    let sigma1 = cfg.matrix(a.sigma1, "sigma1", n)?;
    let k: usize = cfg.optional(a.k, "k")?.unwrap_or(1);
    let simulate: Option<EstimatorKind> = cfg.optional(a.simulate, "simulate")?;
    let samples: usize = cfg.optional(a.samples, "samples")?.unwrap_or(100_000);
    let batches: usize = cfg.optional(a.batches, "batches")?.unwrap_or(10);
    let seed: u64 = cfg.optional(a.seed, "seed")?.unwrap_or(0);
    let out = cfg.optional(a.out, "out")?;

    let prior = WishartParams::new(p1, sigma1.clone())?;
    let problem = VanTreesProblem::new(p, prior, k)?;
    let mc = McConfig::new(seed, samples, batches)?;
    let report = van_trees_bound(&problem)?;
    let mut result = serde_json::to_value(&report).expect("report serializes");
    if let Some(kind) = simulate {
        let spec = match kind {
            EstimatorKind::Constant => EstimatorSpec::prior_mean(&problem),
            EstimatorKind::Clipped => EstimatorSpec::default_clipped(&problem),
        };
        let sim = simulate_estimator(&problem, &spec, &mc)?;
        result["simulation"] = json!({
            "estimator": spec,
            "mse": sim.mse.mean.rows(),
            "mse_std_err": sim.mse.std_err.rows(),
            "loewner_gap": sim.gap,
            "loewner_gap_se": sim.gap_se,
            "dominates_bound": sim.dominates_bound(),
        });
    }
    let config = json!({
        "n": n, "p": p, "p1": p1, "sigma1": sigma1.rows(), "k": k, "simulate": simulate,
        "samples": samples, "batches": batches, "seed": seed,
    });
    match out {
        Some(path) => {
            println!("bound: {}", json!(report.dense_bound.rows()));
            write_artifact(&path, "vantrees", &config, &result)?;
        }
        None => print!("{}", to_pretty(&result)),
    }
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CliResult<u8> {
    let cfg = Settings::load(a.config.as_deref())?;
    let full = cfg.switch(a.full, "full")? && !a.fast;
    let scope = if full { Scope::Full } else { Scope::Fast };
    let seed: u64 = cfg.optional(a.seed, "seed")?.unwrap_or(0);
    let out = cfg.optional(a.out, "out")?;

    let report = run_verification_suite(scope, seed);
    for c in &report.checks {
        let mark = if c.passed() { "pass" } else { "FAIL" };
        println!("{mark} {:<52} measured {:>12.5e}  tolerance {:.3e}", c.check_id, c.measured, c.tolerance);
    }
    let failed = report.failures().count();
    println!("{} checks, {failed} failed", report.checks.len());
    if let Some(path) = out {
        let config = json!({ "full": full, "seed": seed });
        write_artifact(&path, "verify", &config, &serde_json::to_value(&report).expect("report serializes"))?;
    }
    Ok(if report.all_passed { 0 } else { 1 })
}
