//! Command-line front end.
//!
//! Every subcommand reads a strict JSON instance file, runs one laboratory
//! routine and writes CSV, JSON or a short text line. Files are written through
//! a temporary file in the target directory and renamed into place.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 failed check.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ais::{self, DeterministicInstance};
use crate::budget::{self, DEFAULT_STEP};
use crate::error::Error;
use crate::model::{BoundedDensitySpec, ChannelSpec2, Mat2, SymmetricSpecK};
use crate::scheme::{self, SchemeLayout};
use crate::theorem::{sum_gdof_k_symmetric, sum_gdof_two_user};

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "GDOF_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

const DEFAULT_P_GRID: &str = "1e6,1e8,1e10,1e12";
const DEFAULT_P_BAR_GRID: &str = "8,16,32,64";

#[derive(Debug, Parser)]
#[command(name = "gdof-lab", version, about = "Sum-GDoF laboratory for the MISO broadcast channel with partial CSIT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Budget,
    Beta,
    Alpha,
    #[value(name = "P")]
    P,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Destination file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-user sum GDoF of an instance.
    Gdof2 {
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Symmetric K-user sum GDoF.
    Gdofk {
        /// JSON file with `K`, `alpha` and `beta`
        #[arg(long, conflicts_with_all = ["k", "alpha", "beta"])]
        instance: Option<PathBuf>,
        /// Number of users
        #[arg(long = "K", id = "k", requires_all = ["alpha", "beta"])]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Optimal CSIT allocation over a grid of total budgets.
    Budget {
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated ascending budgets.
        #[arg(long)]
        budgets: String,
        /// Resolution of the allocation search.
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Simulates the achievability scheme and fits per-user GDoF slopes.
    Achieve {
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        /// Master seed of every random stream
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value = DEFAULT_P_GRID)]
        p_grid: String,
        /// Fail with exit code 3 when a slope misses its target by more than this.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Alignment probabilities of sampled codeword pairs against their bounds.
    AisProb {
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        /// Master seed of every random stream
        #[arg(long)]
        seed: u64,
        /// Quantization scale, the square root of P
        #[arg(long)]
        p_bar: f64,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        /// Monte Carlo trials per pair.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Growth of the expected aligned-image-set size over a P̄ grid.
    AisSize {
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        /// Master seed of every random stream
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_P_BAR_GRID)]
        p_bar_grid: String,
        /// Channel realizations per grid point.
        #[arg(long, default_value_t = 64)]
        draws: usize,
        /// Largest enumerable alphabet product
        #[arg(long, default_value_t = ais::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
    /// One CSV row per grid point along an axis.
    ///
    /// budget: optimal allocation per total budget. beta: every CSIT entry set
    /// to the grid value. alpha: cross links (two-user) or α (K-user) set to the
    /// grid value. P: one simulation per SNR.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// JSON instance file
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated ascending grid.
        #[arg(long)]
        grid: String,
        /// Master seed, required on the P axis
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[command(flatten)]
        output: Output,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Check(_) => EXIT_CHECK,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::PowerViolation { .. } | Error::IllConditioned { .. } => CliError::Check(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

/// Two-user instance file; `beta` may be omitted for commands that ignore it.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoUserFile {
    alpha: Mat2,
    beta: Option<Mat2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Instance {
    Two(ChannelSpec2),
    K(SymmetricSpecK),
}

impl Instance {
    fn describe(&self) -> Value {
        serde_json::to_value(self).expect("instances serialize")
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("{}: cannot read instance: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: malformed JSON: {e}", path.display())))
}

fn parse_two(path: &Path, value: Value, need_beta: bool) -> Result<ChannelSpec2, CliError> {
    let file: TwoUserFile = serde_json::from_value(value)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let beta = match file.beta {
        Some(b) => b,
        None if need_beta => {
            return Err(CliError::Invalid(format!("{}: beta: missing field", path.display())))
        }
        None => [[0.0; 2]; 2],
    };
    Ok(ChannelSpec2::new(file.alpha, beta)?)
}

/// Loads a two-user (`alpha`, `beta`) or K-user (`K`, `alpha`, `beta`) instance.
pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    load_any(path, true)
}

fn load_any(path: &Path, need_beta: bool) -> Result<Instance, CliError> {
    let value = read_json(path)?;
    if value.get("K").is_some() {
        let spec: SymmetricSpecK = serde_json::from_value(value)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(Instance::K(spec))
    } else {
        Ok(Instance::Two(parse_two(path, value, need_beta)?))
    }
}

fn load_two(path: &Path, need_beta: bool) -> Result<ChannelSpec2, CliError> {
    let value = read_json(path)?;
    if value.get("K").is_some() {
        return Err(CliError::Invalid(format!(
            "{}: this command needs a two-user instance",
            path.display()
        )));
    }
    parse_two(path, value, need_beta)
}

/// Parses a comma-separated, nonempty, strictly ascending list.
pub fn parse_grid(name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Invalid(format!("{name}: '{s}' is not a finite number")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Invalid(format!("{name}: grid is empty")));
    }
    if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
        return Err(CliError::Invalid(format!(
            "{name}[{}]: grid must be strictly ascending",
            i + 1
        )));
    }
    Ok(values)
}

/// Rounds every floating-point number in `value` to 12 significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = n.as_f64().expect("f64 number");
            let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
            *value = json!(rounded);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("outputs serialize");
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

/// Shortest fixed-point rendering with at least two decimals.
pub fn fmt_decimal(v: f64) -> String {
    for digits in 2..=12 {
        let s = format!("{v:.digits$}");
        if (s.parse::<f64>().expect("formatted float parses") - v).abs() <= 1e-12 * v.abs().max(1.0) {
            return s;
        }
    }
    format!("{v}")
}

fn csv<I: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: I) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV numbers carry the same 12 significant digits as JSON output.
fn num(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Writes `content` to `out` atomically, or to `stdout` when `out` is `None`.
fn emit(out: &Option<PathBuf>, content: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match out {
        None => stdout.write_all(content.as_bytes()).map_err(io),
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            tmp.write_all(content.as_bytes()).map_err(io)?;
            tmp.persist(path)
                .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
            Ok(())
        }
    }
}

fn layout_for(instance: &Instance) -> Result<SchemeLayout, CliError> {
    Ok(match instance {
        Instance::Two(s) => scheme::build_layout(s)?,
        Instance::K(s) => scheme::build_layout_k(s)?,
    })
}

fn layout_summary(layout: &SchemeLayout) -> Value {
    json!({
        "case": layout.case_id,
        "transform": layout.transform,
        "reduction": layout.reduction,
        "m": layout.m,
        "target": layout.target,
        "layers": layout.layers.iter().map(|l| json!({
            "message": l.message.to_string(),
            "owner": layout.transform.user(l.owner) + 1,
            "gdof_load": l.gdof_load,
            "power_exponent": l.power.exponent(),
            "decoded_by": l.decoders.iter()
                .map(|&(r, rank)| json!({"receiver": layout.transform.user(r) + 1, "rank": rank}))
                .collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn rate_header(users: usize) -> Vec<String> {
    std::iter::once("P".to_string())
        .chain((1..=users).map(|k| format!("rate_user{k}")))
        .collect()
}

fn rate_rows(p_grid: &[f64], rates: &[Vec<f64>]) -> Vec<Vec<String>> {
    p_grid
        .iter()
        .zip(rates)
        .map(|(p, r)| std::iter::once(num(*p)).chain(r.iter().map(|v| num(*v))).collect())
        .collect()
}

fn budget_rows(curve: &budget::BudgetCurve) -> Vec<Vec<String>> {
    curve
        .points
        .iter()
        .map(|a| {
            vec![
                num(a.budget),
                num(a.achieved),
                num(a.beta[0][0]),
                num(a.beta[0][1]),
                num(a.beta[1][0]),
                num(a.beta[1][1]),
            ]
        })
        .collect()
}

const BUDGET_HEADER: [&str; 6] = ["budget", "d_sum", "b11", "b12", "b21", "b22"];

fn run_command(command: Command, stdout: &mut Vec<u8>, stderr: &mut Vec<u8>) -> Result<(), CliError> {
    let density = BoundedDensitySpec::default();
    match command {
        Command::Gdof2 { instance, output } => {
            let spec = load_two(&instance, true)?;
            let b = sum_gdof_two_user(&spec)?;
            let text = match output.format.unwrap_or(Format::Text) {
                Format::Text => format!(
                    "D1={} D2={} d_sum={}\n",
                    fmt_decimal(b.d1),
                    fmt_decimal(b.d2),
                    fmt_decimal(b.d_sum)
                ),
                Format::Json => to_json(&json!({"instance": spec, "result": b})),
                Format::Csv => csv(
                    &["D1", "D2", "d_sum", "binding", "regime"],
                    [vec![num(b.d1), num(b.d2), num(b.d_sum), format!("{:?}", b.binding), b.regime.to_string()]],
                ),
            };
            emit(&output.out, &text, stdout)
        }
        Command::Gdofk { instance, k, alpha, beta, output } => {
            let spec = match (instance, k, alpha, beta) {
                (Some(path), ..) => {
                    let value = read_json(&path)?;
                    let s: SymmetricSpecK = serde_json::from_value(value)
                        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
                    s.validate()?;
                    s
                }
                (None, Some(k), Some(a), Some(b)) => SymmetricSpecK::new(k, a, b)?,
                _ => {
                    return Err(CliError::Invalid(
                        "gdofk needs --instance or all of --K, --alpha, --beta".into(),
                    ))
                }
            };
            let d = sum_gdof_k_symmetric(&spec)?;
            let text = match output.format.unwrap_or(Format::Text) {
                Format::Text => format!("{}\n", fmt_decimal(d).trim_end_matches('0').trim_end_matches('.')),
                Format::Json => to_json(&json!({"instance": spec, "d_sum": d})),
                Format::Csv => csv(&["K", "alpha", "beta", "d_sum"], [vec![spec.k.to_string(), num(spec.alpha), num(spec.beta), num(d)]]),
            };
            emit(&output.out, &text, stdout)
        }
        Command::Budget { instance, budgets, step, output } => {
            let spec = load_two(&instance, false)?;
            let grid = parse_grid("budgets", &budgets)?;
            let curve = budget::budget_curve(&spec.alpha, &grid, step)?;
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&json!({"alpha": spec.alpha, "curve": curve})),
                _ => csv(&BUDGET_HEADER, budget_rows(&curve)),
            };
            emit(&output.out, &text, stdout)
        }
        Command::Achieve { instance, seed, trials, p_grid, tol, output } => {
            let inst = load_instance(&instance)?;
            let grid = parse_grid("p_grid", &p_grid)?;
            let layout = layout_for(&inst)?;
            let result = match &inst {
                Instance::Two(s) => scheme::estimate_gdof_slope(&layout, s, &density, &grid, trials, seed)?,
                Instance::K(s) => scheme::estimate_gdof_slope(&layout, s, &density, &grid, trials, seed)?,
            };
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&json!({
                    "instance": inst.describe(),
                    "layout": layout_summary(&layout),
                    "P_grid": result.p_grid,
                    "per_layer_exponents": result.layer_exponents,
                    "leakage": result.leakage,
                    "per_user_rates": result.per_user_rates,
                    "slopes": result.slope_estimates,
                    "targets": result.targets,
                    "max_zf_residual": result.max_zf_residual,
                    "redraws": result.redraws,
                })),
                _ => {
                    let header = rate_header(layout.users);
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    csv(&header, rate_rows(&result.p_grid, &result.per_user_rates))
                }
            };
            emit(&output.out, &text, stdout)?;
            if let Some(tol) = tol {
                for (k, (s, t)) in result.slope_estimates.iter().zip(&result.targets).enumerate() {
                    if (s - t).abs() > tol {
                        return Err(CliError::Check(format!(
                            "user {} slope {s:.4} misses target {t:.4} by more than {tol}",
                            k + 1
                        )));
                    }
                }
            }
            Ok(())
        }
        Command::AisProb { instance, seed, p_bar, pairs, trials, output } => {
            let spec = load_two(&instance, true)?;
            let inst = DeterministicInstance::new(&spec, p_bar)?;
            let sampled = ais::sample_pairs(&inst, pairs, seed)?;
            let estimates = sampled
                .par_iter()
                .enumerate()
                .map(|(i, pair)| {
                    let s = crate::seed::derive(seed, &[crate::seed::TAG_PAIR, i as u64]);
                    ais::alignment_probability_mc(*pair, &inst, &density, trials, s)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let failures = estimates.iter().filter(|e| !e.pass).count();
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&json!({
                    "instance": spec, "p_bar": p_bar, "estimates": estimates,
                    "failures": failures, "pass": failures == 0,
                })),
                _ => csv(
                    &["lambda1", "lambda2", "nu1", "nu2", "hits", "trials", "estimate", "bound", "pass"],
                    estimates.iter().map(|e| {
                        let bound = e.bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
                        vec![
                            e.pair.lambda.0.to_string(),
                            e.pair.lambda.1.to_string(),
                            e.pair.nu.0.to_string(),
                            e.pair.nu.1.to_string(),
                            e.hits.to_string(),
                            e.trials.to_string(),
                            num(e.estimate),
                            num(bound),
                            e.pass.to_string(),
                        ]
                    }),
                ),
            };
            emit(&output.out, &text, stdout)?;
            if failures > 0 {
                return Err(CliError::Check(format!(
                    "{failures} of {} pairs exceed their alignment bound",
                    estimates.len()
                )));
            }
            Ok(())
        }
        Command::AisSize { instance, seed, p_bar_grid, draws, cap, output } => {
            let spec = load_two(&instance, true)?;
            let grid = parse_grid("p_bar_grid", &p_bar_grid)?;
            let stats = ais::expected_size_curve(&spec, &grid, draws, &density, seed, cap)?;
            let summary = to_json(&json!({
                "fitted_exponent": stats.fitted_exponent,
                "bound_exponent": stats.bound_exponent,
                "pass": stats.pass,
            }));
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&stats),
                _ => csv(
                    &["p_bar", "mean_size", "draws"],
                    stats
                        .p_bar_grid
                        .iter()
                        .zip(&stats.mean_size)
                        .map(|(p, m)| vec![num(*p), num(*m), stats.draws.to_string()]),
                ),
            };
            emit(&output.out, &text, stdout)?;
            let _ = stderr.write_all(summary.as_bytes());
            if !stats.pass {
                return Err(CliError::Check(format!(
                    "fitted exponent {:.4} exceeds bound {:.4} + {}",
                    stats.fitted_exponent, stats.bound_exponent, stats.slack
                )));
            }
            Ok(())
        }
        Command::Sweep { axis, instance, grid, seed, trials, step, output } => {
            let grid = parse_grid("grid", &grid)?;
            let text = sweep(axis, &instance, &grid, seed, trials, step, &density)?;
            emit(&output.out, &text, stdout)
        }
    }
}

fn sweep(
    axis: Axis,
    path: &Path,
    grid: &[f64],
    seed: Option<u64>,
    trials: usize,
    step: f64,
    density: &BoundedDensitySpec,
) -> Result<String, CliError> {
    match axis {
        Axis::Budget => {
            let spec = load_two(path, false)?;
            let curve = budget::budget_curve(&spec.alpha, grid, step)?;
            Ok(csv(&BUDGET_HEADER, budget_rows(&curve)))
        }
        Axis::Beta | Axis::Alpha => {
            let inst = load_any(path, matches!(axis, Axis::Alpha))?;
            let label = if matches!(axis, Axis::Beta) { "beta" } else { "alpha" };
            match inst {
                Instance::Two(base) => {
                    let rows = grid
                        .par_iter()
                        .map(|&v| {
                            let spec = if matches!(axis, Axis::Beta) {
                                ChannelSpec2::new(base.alpha, [[v; 2]; 2])
                            } else {
                                let a = base.alpha;
                                ChannelSpec2::new([[a[0][0], v], [v, a[1][1]]], base.beta)
                            }
                            .map_err(|e| CliError::Invalid(format!("{label}={v}: {e}")))?;
                            let b = sum_gdof_two_user(&spec)?;
                            Ok(vec![num(v), num(b.d1), num(b.d2), num(b.d_sum)])
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Ok(csv(&[label, "d1", "d2", "d_sum"], rows))
                }
                Instance::K(base) => {
                    let rows = grid
                        .par_iter()
                        .map(|&v| {
                            let spec = if matches!(axis, Axis::Beta) {
                                SymmetricSpecK::new(base.k, base.alpha, v)
                            } else {
                                SymmetricSpecK::new(base.k, v, base.beta)
                            }
                            .map_err(|e| CliError::Invalid(format!("{label}={v}: {e}")))?;
                            Ok(vec![num(v), num(sum_gdof_k_symmetric(&spec)?)])
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Ok(csv(&[label, "d_sum"], rows))
                }
            }
        }
        Axis::P => {
            let seed = seed.ok_or_else(|| CliError::Invalid("seed: required for a P sweep".into()))?;
            let inst = load_instance(path)?;
            let layout = layout_for(&inst)?;
            let rates = grid
                .iter()
                .map(|&p| {
                    let snap = match &inst {
                        Instance::Two(s) => scheme::simulate(&layout, s, density, p, trials, seed),
                        Instance::K(s) => scheme::simulate(&layout, s, density, p, trials, seed),
                    }?;
                    Ok(snap.user_rates)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let header = rate_header(layout.users);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            Ok(csv(&header, rate_rows(grid, &rates)))
        }
    }
}

/// Reads the worker cap from [`THREADS_ENV`].
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Invalid(format!("{THREADS_ENV}: '{v}' is not a positive integer"))),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
///
/// Argument errors, help and version requests are handled by the parser and
/// also reported through the returned code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return e.exit_code();
        }
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = thread_cap().and_then(|cap| match cap {
        None => run_command(cli.command, &mut out, &mut err),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(|| run_command(cli.command, &mut out, &mut err)),
    });
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let mut msg = String::new();
            let _ = writeln!(msg, "gdof-lab: {e}");
            let _ = stderr.write_all(msg.as_bytes());
            e.exit_code()
        }
    }
}
