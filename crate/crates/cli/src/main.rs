//! Command-line front end: build objects from JSON files, evaluate
//! coefficients and inner products, compose and apply operators, certify
//! unitarity, and run lattice convergence studies.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, files, or
//! object parameters), 2 numerical or capacity error, 3 a unitarity check
//! that ran cleanly but reported a failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Deserialize;

use cmpkit::catalog::{build, CmpuFamily};
use cmpkit::cmpo::{Cmpo, CoeffLabel};
use cmpkit::cmps::Cmps;
use cmpkit::error::Error as CmpError;
use cmpkit::format_complex;
use cmpkit::linalg::{CMatrix, Interval, MatrixFn};
use cmpkit::oracle::convergence_study;
use cmpkit::propagator::{path_ordered_exp, path_ordered_exp_rmul, Method, PropagatorConfig};
use cmpkit::unitarity::{check_unitary, check_unitary_side, ProductSide};

#[derive(Parser)]
#[command(
    name = "cmpkit",
    about = "Continuous matrix product states, operators, and unitaries",
    version = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)")
)]
struct Cli {
    /// Cap the worker thread count (default: CMPKIT_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Path-ordered exponential of a matrix-function generator.
    Propagate(PropagateArgs),
    /// Coefficient of a state or operator at given labels/points.
    Coeff(CoeffArgs),
    /// Inner product of two states.
    Inner(InnerArgs),
    /// Operator product (first applied after second).
    Compose(ComposeArgs),
    /// Apply an operator to a state.
    Apply(ApplyArgs),
    /// Sampled unitarity certificate for an operator.
    CheckUnitarity(CheckArgs),
    /// Named unitary family constructors.
    Catalog(CatalogArgs),
    /// Lattice-versus-continuum convergence table.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct PropagateArgs {
    /// Matrix-function JSON file for the generator.
    #[arg(long)]
    generator: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Integrate the right-multiplication flow instead of the left one.
    #[arg(long)]
    rmul: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffArgs {
    #[arg(long, conflicts_with = "cmps")]
    cmpo: Option<PathBuf>,
    #[arg(long)]
    cmps: Option<PathBuf>,
    /// Insertion labels, e.g. "LAR" (operators only).
    #[arg(long, default_value = "")]
    labels: String,
    /// Comma-separated insertion points, strictly increasing.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    points: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InnerArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    first: PathBuf,
    #[arg(long)]
    second: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    cmpo: PathBuf,
    #[arg(long)]
    cmps: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    cmpo: PathBuf,
    #[arg(long, default_value_t = 4)]
    jmax: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probe both products ("both"), or one of "adjoint-op" / "op-adjoint".
    #[arg(long, default_value = "both")]
    side: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    #[command(subcommand)]
    action: CatalogAction,
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List the family tags.
    List,
    /// Build a family on an interval and write the operator JSON.
    Build {
        /// Family tag, e.g. "parity_phase".
        #[arg(long)]
        family: String,
        /// Family-specific JSON parameter record (file path).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Interval as "x_minus,x_plus".
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    cmpo: PathBuf,
    /// Probe file: JSON list of {"labels": "LA", "points": [..]}.
    #[arg(long, alias = "probe")]
    probes: PathBuf,
    /// Comma-separated increasing lattice sizes, at least three.
    #[arg(long, alias = "Ns")]
    ns: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct ProbeSpec {
    labels: String,
    points: Vec<f64>,
}

enum CliError {
    Validation(String),
    Numerical(String),
    UnitarityFailed,
}

impl From<CmpError> for CliError {
    fn from(e: CmpError) -> CliError {
        match e {
            CmpError::Accuracy { .. } | CmpError::Capacity(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {what} {path:?}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("cannot parse {what} {path:?}: {e}")))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Validation(format!("cannot write {path:?}: {e}")))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

fn parse_points(text: &str) -> CliResult<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad point {p:?}: {e}")))
        })
        .collect()
}

fn parse_interval(text: &str) -> CliResult<Interval> {
    let parts = parse_points(text)?;
    if parts.len() != 2 {
        return Err(CliError::Validation(format!(
            "interval must be \"x_minus,x_plus\", got {text:?}"
        )));
    }
    Interval::new(parts[0], parts[1]).map_err(CliError::from)
}

fn emit_complex(value: C64, out: Option<&PathBuf>) -> CliResult<()> {
    println!("{}", format_complex(value));
    if let Some(path) = out {
        write_json(path, &[value.re, value.im])?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Propagate(args) => {
            let g: MatrixFn = read_json(&args.generator, "generator")?;
            let cfg = PropagatorConfig::new(args.tol, 100_000, Method::Rk4Adaptive)?;
            let w: CMatrix = if args.rmul {
                path_ordered_exp_rmul(&g, args.from, args.to, &cfg)?
            } else {
                path_ordered_exp(&g, args.from, args.to, &cfg)?
            };
            let text = serde_json::to_string_pretty(&w)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            println!("{text}");
            if let Some(path) = args.out {
                write_text(&path, &format!("{text}\n"))?;
            }
            Ok(())
        }
        Command::Coeff(args) => {
            let points = parse_points(&args.points)?;
            let value = match (&args.cmpo, &args.cmps) {
                (Some(path), None) => {
                    let op: Cmpo = read_json(path, "operator")?;
                    let labels = CoeffLabel::parse_string(args.labels.trim())?;
                    op.coefficient(&labels, &points)?
                }
                (None, Some(path)) => {
                    if !args.labels.trim().is_empty() {
                        return Err(CliError::Validation(
                            "state coefficients take no labels".into(),
                        ));
                    }
                    let state: Cmps = read_json(path, "state")?;
                    state.coefficient(&points)?
                }
                _ => {
                    return Err(CliError::Validation(
                        "pass exactly one of --cmpo or --cmps".into(),
                    ))
                }
            };
            emit_complex(value, args.out.as_ref())
        }
        Command::Inner(args) => {
            let left: Cmps = read_json(&args.left, "state")?;
            let right: Cmps = read_json(&args.right, "state")?;
            emit_complex(left.inner_product(&right)?, args.out.as_ref())
        }
        Command::Compose(args) => {
            let first: Cmpo = read_json(&args.first, "operator")?;
            let second: Cmpo = read_json(&args.second, "operator")?;
            let product = first.compose(&second)?;
            write_json(&args.out, &product)?;
            println!("composed operator with D = {}", product.dim());
            Ok(())
        }
        Command::Apply(args) => {
            let op: Cmpo = read_json(&args.cmpo, "operator")?;
            let state: Cmps = read_json(&args.cmps, "state")?;
            let image = op.apply(&state)?;
            write_json(&args.out, &image)?;
            println!("applied operator; image has D = {}", image.dim());
            Ok(())
        }
        Command::CheckUnitarity(args) => {
            let op: Cmpo = read_json(&args.cmpo, "operator")?;
            let report = match args.side.as_str() {
                "both" => check_unitary(&op, args.jmax, args.samples, args.tol, args.seed)?,
                "adjoint-op" => check_unitary_side(
                    &op,
                    ProductSide::AdjointTimesOp,
                    args.jmax,
                    args.samples,
                    args.tol,
                    args.seed,
                )?,
                "op-adjoint" => check_unitary_side(
                    &op,
                    ProductSide::OpTimesAdjoint,
                    args.jmax,
                    args.samples,
                    args.tol,
                    args.seed,
                )?,
                other => {
                    return Err(CliError::Validation(format!("unknown side {other:?}")));
                }
            };
            println!(
                "passed: {}\nmax_a_deviation: {:.11e}\nmax_offdiag: {:.11e}\nprobes_per_sector: {:?}",
                report.passed, report.max_a_deviation, report.max_offdiag, report.probes_per_sector
            );
            if let Some(path) = args.out.as_ref() {
                write_json(path, &report)?;
            }
            if !report.passed {
                return Err(CliError::UnitarityFailed);
            }
            Ok(())
        }
        Command::Catalog(args) => match args.action {
            CatalogAction::List => {
                for tag in [
                    "identity",
                    "displacement",
                    "permutation_phase",
                    "parity_phase",
                    "number_controlled_phase",
                    "multi_sector_phase",
                    "displaced_phase",
                    "subspace_unitary",
                    "swap_vacuum_one_particle",
                ] {
                    println!("{tag}");
                }
                Ok(())
            }
            CatalogAction::Build { family, params, interval, out } => {
                let interval = parse_interval(&interval)?;
                let mut record = match params {
                    Some(path) => read_json::<serde_json::Value>(&path, "family parameters")?,
                    None => serde_json::Value::Object(Default::default()),
                };
                let obj = record.as_object_mut().ok_or_else(|| {
                    CliError::Validation("family parameters must be a JSON object".into())
                })?;
                obj.insert("family".into(), serde_json::Value::String(family));
                let family: CmpuFamily = serde_json::from_value(record)
                    .map_err(|e| CliError::Validation(format!("bad family record: {e}")))?;
                let op = build(&family, interval)?;
                write_json(&out, &op)?;
                println!("built operator with D = {}", op.dim());
                Ok(())
            }
        },
        Command::Converge(args) => {
            let op: Cmpo = read_json(&args.cmpo, "operator")?;
            let specs: Vec<ProbeSpec> = read_json(&args.probes, "probe list")?;
            let probes = specs
                .iter()
                .map(|s| Ok((CoeffLabel::parse_string(&s.labels)?, s.points.clone())))
                .collect::<Result<Vec<_>, CmpError>>()?;
            let ns = parse_points(&args.ns)?
                .into_iter()
                .map(|v| v as usize)
                .collect::<Vec<_>>();
            let table = convergence_study(&op, &probes, &ns)?;
            write_text(&args.out, &table.to_csv())?;
            for (i, slope) in table.slopes.iter().enumerate() {
                match slope {
                    Some(s) => println!("probe {i}: slope {s:.11e}"),
                    None => println!("probe {i}: exact"),
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("CMPKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::UnitarityFailed) => {
            eprintln!("unitarity check reported a failure");
            ExitCode::from(3)
        }
    }
}
