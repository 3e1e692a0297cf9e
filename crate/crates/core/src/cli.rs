//! Command-line front end. `run_command` does all the work and returns the
//! exit code and both output streams, so the binary is a thin wrapper.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input or domain error,
//! 3 enumeration cap exceeded.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{curve_csv, linear_grid, required_snr, snr_delta_curve, BoundRule};
use crate::error::{Error, Result};
use crate::experiments::{run_sweep_to_dir, verify_bound, ExperimentConfig, SnrMode};
use crate::fmt::{full, text};
use crate::infotheory::{
    feasibility_rho_max, min_sampling_rate, necessary_snr, sufficient_region, RecoveryRegime,
};
use crate::numkernel::{read_matrix_csv, read_vector};
use crate::omp::{omp_run, Problem};
use crate::ric::{ric_exact, ric_sampled_lower_bound, DEFAULT_CAP};

pub const THREADS_ENV: &str = "OMPB_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn ok(stdout: String) -> Self {
        Self {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(exit_code: i32, message: &str) -> Self {
        let line = message
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        Self {
            exit_code,
            stdout: String::new(),
            stderr: format!("error: {line}\n"),
        }
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err.root() {
        Error::Capacity { .. } => 3,
        _ => 2,
    }
}

/// OMP support recovery, restricted isometry constants and error-rate bounds.
///
/// All indices (columns, support entries, trial numbers) are 0-based.
#[derive(Debug, Parser)]
#[command(name = "ompb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover a K-sparse support with orthogonal matching pursuit.
    Omp(OmpArgs),
    /// Restricted isometry constant of a given order.
    Ric(RicArgs),
    /// Required SNR for a target error rate under one bound.
    Bounds(BoundsArgs),
    /// Required SNR as a function of delta, written as CSV.
    Curve(CurveArgs),
    /// Information-theoretic necessary and sufficient conditions.
    Feasibility(FeasibilityArgs),
    /// Seeded Monte Carlo sweep comparing OMP error rates with the bound.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct OmpArgs {
    /// Matrix CSV: one row per line, comma separated, no header.
    #[arg(long)]
    matrix: PathBuf,
    /// Measurement vector: one value per line.
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    sparsity: usize,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print `index,value` rows of the estimate at full precision.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct RicArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    order: usize,
    /// Maximum number of subsets to enumerate.
    #[arg(long, conflicts_with = "samples")]
    cap: Option<u128>,
    /// Lower-bound delta from this many random subsets instead of enumerating.
    #[arg(long, requires = "seed")]
    samples: Option<u64>,
    #[arg(long, requires = "samples")]
    seed: Option<u64>,
    /// Print a CSV header and the result line at full precision.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    rho0: f64,
    /// ||x||_2 / (sqrt(K) x_min), at least 1.
    #[arg(long = "mar-ratio", conflicts_with = "mar")]
    mar_ratio: Option<f64>,
    /// K x_min^2 / ||x||_2^2 in (0, 1]. Defaults to 1.
    #[arg(long = "MAR", id = "mar")]
    mar: Option<f64>,
    /// theorem1, corollary1, corollary2 or corollary3.
    #[arg(long, default_value = "theorem1")]
    rule: String,
    #[command(flatten)]
    theorem: TheoremArgs,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct TheoremArgs {
    /// theorem1 only; default 0.5.
    #[arg(long)]
    theta1: Option<f64>,
    /// theorem1 only; default inf.
    #[arg(long)]
    theta2: Option<f64>,
    /// theorem1 only; default 1.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long)]
    rule: String,
    #[arg(long)]
    rho0: f64,
    #[arg(long = "delta-min")]
    delta_min: f64,
    #[arg(long = "delta-max")]
    delta_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long)]
    steps: usize,
    /// Defaults to 1.
    #[arg(long = "MAR")]
    mar: Option<f64>,
    #[command(flatten)]
    theorem: TheoremArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeasibilityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    rho0: f64,
    #[arg(long)]
    snr: f64,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Receives records.csv, summary.txt and summary.csv.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

/// Parses and runs `argv` (including the program name).
pub fn run_command<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CommandResult::ok(e.render().to_string())
                }
                _ => CommandResult::fail(1, &first_line(&e.render().to_string())),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(out) => CommandResult::ok(out),
        Err(e) => CommandResult::fail(exit_code_for(&e), &e.to_string()),
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("usage error")
        .trim_start_matches("error: ")
        .to_string()
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Omp(a) => omp(a),
        Command::Ric(a) => ric(a),
        Command::Bounds(a) => bounds(a),
        Command::Curve(a) => curve(a),
        Command::Feasibility(a) => feasibility(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn join(idx: &[usize]) -> String {
    idx.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn omp(a: OmpArgs) -> Result<String> {
    let phi = read_matrix_csv(&a.matrix)?;
    let y = read_vector(&a.measurements)?;
    let out = omp_run(&Problem::new(phi, y, a.sparsity)?)?;
    if let Some(path) = &a.trace {
        fs::write(path, out.trace_csv())?;
    }
    let sorted = out.sorted_support();
    let mut s = String::new();
    if a.csv {
        s.push_str("index,value\n");
        for &i in &sorted {
            let _ = writeln!(s, "{i},{}", out.x_hat[i]);
        }
        return Ok(s);
    }
    let _ = writeln!(s, "support: {}", join(&sorted));
    let _ = writeln!(s, "selection order: {}", join(&out.support));
    s.push_str("estimate:\n");
    for &i in &sorted {
        let _ = writeln!(s, "  {i}: {}", text(out.x_hat[i]));
    }
    let residual = out
        .trace
        .last()
        .map_or(out.initial_residual_norm_sq, |r| r.residual_norm_sq);
    let _ = writeln!(s, "residual norm^2: {}", text(residual));
    Ok(s)
}

fn ric(a: RicArgs) -> Result<String> {
    let phi = read_matrix_csv(&a.matrix)?;
    let r = match a.samples {
        Some(samples) => ric_sampled_lower_bound(&phi, a.order, samples, a.seed.unwrap_or(0))?,
        None => ric_exact(&phi, a.order, a.cap.unwrap_or(DEFAULT_CAP))?,
    };
    if a.csv {
        return Ok(format!("order,delta,exact,witness\n{}\n", r.csv_line()));
    }
    let mut s = format!(
        "{},{},{},{}\n",
        r.order,
        text(r.delta),
        r.exact,
        join(&r.witness)
    );
    if !r.rip_holds() {
        let _ = writeln!(
            s,
            "note: delta >= 1, the restricted isometry property does not hold at this order"
        );
    }
    if !r.exact {
        let _ = writeln!(s, "note: sampled lower bound, not certified");
    }
    Ok(s)
}

fn rule_from(name: &str, t: &TheoremArgs) -> Result<BoundRule> {
    let rule: BoundRule = name.parse()?;
    match rule {
        BoundRule::Theorem1 {
            theta1,
            theta2,
            tau,
        } => Ok(BoundRule::Theorem1 {
            theta1: t.theta1.unwrap_or(theta1),
            theta2: t.theta2.unwrap_or(theta2),
            tau: t.tau.unwrap_or(tau),
        }),
        _ if t.theta1.is_some() || t.theta2.is_some() || t.tau.is_some() => Err(Error::validation(
            format!("--theta1, --theta2 and --tau only apply to theorem1, not {name}"),
        )),
        _ => Ok(rule),
    }
}

fn bounds(a: BoundsArgs) -> Result<String> {
    let rule = rule_from(&a.rule, &a.theorem)?;
    let mar = match (a.mar_ratio, a.mar) {
        (Some(t), _) => {
            if !(t >= 1.0) {
                return Err(Error::domain(format!("mar ratio {t} must be at least 1")));
            }
            1.0 / (t * t)
        }
        (None, Some(m)) => m,
        (None, None) => 1.0,
    };
    let req = required_snr(rule, a.delta, a.rho0, mar)?;
    let c = rule.coefficients(a.delta)?;
    if a.csv {
        return Ok(format!(
            "rule,delta,rho0,MAR,required_snr,error_bound,C1,C2,C3\n{},{},{},{},{},{},{},{},{}\n",
            rule.name(),
            a.delta,
            a.rho0,
            mar,
            req.snr,
            req.error_bound,
            c.c1,
            c.c2,
            c.c3
        ));
    }
    let mut s = String::new();
    let _ = writeln!(s, "rule: {}", rule.name());
    if let BoundRule::Theorem1 {
        theta1,
        theta2,
        tau,
    } = rule
    {
        let _ = writeln!(
            s,
            "theta1 = {}, theta2 = {}, tau = {}",
            text(theta1),
            text(theta2),
            text(tau)
        );
    }
    let _ = writeln!(s, "delta: {}", text(a.delta));
    let _ = writeln!(s, "rho0: {}", text(a.rho0));
    let _ = writeln!(s, "MAR: {}", text(mar));
    let _ = writeln!(s, "required snr: {}", text(req.snr));
    let _ = writeln!(s, "error bound: {}", text(req.error_bound));
    let _ = writeln!(
        s,
        "C1 = {}, C2 = {}, C3 = {}",
        text(c.c1),
        text(c.c2),
        text(c.c3)
    );
    Ok(s)
}

fn curve(a: CurveArgs) -> Result<String> {
    let rule = rule_from(&a.rule, &a.theorem)?;
    let grid = linear_grid(a.delta_min, a.delta_max, a.steps)?;
    let points = snr_delta_curve(rule, a.rho0, a.mar.unwrap_or(1.0), &grid)?;
    fs::write(&a.out, curve_csv(&points))?;
    Ok(format!(
        "wrote {} points to {}\n",
        points.len(),
        a.out.display()
    ))
}

fn feasibility(a: FeasibilityArgs) -> Result<String> {
    let regime = RecoveryRegime {
        n: a.n,
        m: a.m,
        k: a.k,
        rho0: a.rho0,
        snr: a.snr,
    };
    let report = sufficient_region(&regime)?;
    let need_snr = necessary_snr(a.n, a.m, a.k, a.rho0)?;
    let need_rate = min_sampling_rate(a.n, a.k, a.rho0, a.snr)?;
    let rho_max = feasibility_rho_max(a.n, a.m, a.k)?;
    if a.csv {
        return Ok(format!(
            "snr_rho_at_least_e,rate_condition,snr_rho_threshold,meets_threshold,threshold_below_four,necessary_snr,min_sampling_rate,rho_max\n{},{},{},{},{},{},{},{}\n",
            report.condition1,
            report.condition2,
            full(report.snr_rho_threshold),
            report.meets_threshold,
            report.threshold_below_four,
            full(need_snr),
            full(need_rate),
            full(rho_max)
        ));
    }
    let mut s = String::new();
    let _ = writeln!(s, "sufficient conditions:");
    let _ = writeln!(s, "  snr * rho0 >= e: {}", report.condition1);
    match &report.condition2_note {
        Some(note) => {
            let _ = writeln!(
                s,
                "  m/n > K/n + 2 h(K/n) / ln(snr rho0 / e): false ({note})"
            );
        }
        None => {
            let _ = writeln!(
                s,
                "  m/n > K/n + 2 h(K/n) / ln(snr rho0 / e): {}",
                report.condition2
            );
        }
    }
    let _ = writeln!(
        s,
        "  snr * rho0 > exp(2n h(K/n) / (m - K) + 1) = {}: {}",
        text(report.snr_rho_threshold),
        report.meets_threshold
    );
    let _ = writeln!(s, "  threshold below 4: {}", report.threshold_below_four);
    let _ = writeln!(s, "necessary conditions:");
    let _ = writeln!(
        s,
        "  necessary snr: {} (given {}: {})",
        text(need_snr),
        text(a.snr),
        a.snr >= need_snr
    );
    let mf = a.m as f64 / a.n as f64;
    let _ = writeln!(
        s,
        "  minimum sampling rate: {} (given {}: {})",
        text(need_rate),
        text(mf),
        mf >= need_rate
    );
    let _ = writeln!(
        s,
        "  largest rho0 matched by the 4/(1-delta) requirement: {}",
        text(rho_max)
    );
    Ok(s)
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::validation(format!(
                "{THREADS_ENV} = {v:?} must be a positive integer"
            ))),
        },
        _ => Ok(None),
    }
}

fn sweep(a: SweepArgs) -> Result<String> {
    let config = ExperimentConfig::from_file(&a.config)?;
    let threads = threads_from_env()?;
    let out = run_sweep_to_dir(&config, &a.out_dir, threads)?;
    let rho0 = match config.snr_mode {
        SnrMode::FromBound { rho0, .. } => Some(rho0),
        SnrMode::Fixed { .. } => None,
    };
    let report = verify_bound(&out.records, &out.summary, rho0);
    let mut s = out.summary.to_text();
    s.push_str(&report.to_text());
    let _ = writeln!(
        s,
        "records written to {}",
        a.out_dir.join("records.csv").display()
    );
    Ok(s)
}
