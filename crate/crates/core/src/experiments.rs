//! Seeded Monte Carlo harness: draw a measurement matrix and a sparse signal
//! per trial, add noise at an exact target SNR, run OMP, and compare the
//! observed support error rate with the bound predicted for that trial.
//!
//! Every trial derives its own three seeds from the sweep seed, so any trial
//! can be replayed in isolation and the sweep output does not depend on how
//! many threads ran it.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{error_rate, error_rate_bound, required_snr, BoundRule, SignalStats};
use crate::error::{Error, Result};
use crate::numkernel::{matvec, norm, norm_sq, DenseMatrix};
use crate::omp::{missed_set_stats, omp_run, Problem};
use crate::ric::{binomial, ric_exact, ric_sampled_lower_bound, DEFAULT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// i.i.d. N(0, 1/m) entries.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalProfile {
    /// Unit magnitudes with random signs.
    Equal,
    /// Standard normal nonzeros.
    GaussianMagnitudes,
    /// One large entry, the rest unit magnitude, scaled to hit `mar_ratio_target`.
    Impulse { mar_ratio_target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SnrMode {
    /// A fixed target SNR (`null` for noiseless); `rule` supplies the
    /// coefficients of the bound each trial is compared against.
    Fixed {
        snr: Option<f64>,
        #[serde(default = "default_rule")]
        rule: BoundRule,
    },
    /// Noise set to the SNR that `rule` requires for error rate `rho0`,
    /// given each trial's `delta` and MAR.
    FromBound { rule: BoundRule, rho0: f64 },
}

fn default_rule() -> BoundRule {
    BoundRule::Corollary3
}

impl SnrMode {
    fn rule(&self) -> BoundRule {
        match *self {
            SnrMode::Fixed { rule, .. } | SnrMode::FromBound { rule, .. } => rule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaSource {
    /// `delta_2K` of each trial's matrix by exhaustive enumeration.
    ExactRic,
    Provided(f64),
    /// Sampled lower bound on `delta_2K`. Plugging a lower bound into an upper
    /// bound is not certified, so this must be acknowledged explicitly.
    SampledLowerBound {
        samples: u64,
        allow_non_certified: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub ensemble: Ensemble,
    pub normalize_columns: bool,
    pub signal_profile: SignalProfile,
    pub snr_mode: SnrMode,
    pub delta_source: DeltaSource,
    pub trials: usize,
    pub seed: u64,
    /// Missed-set diagnostics only.
    pub tau: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn certified(&self) -> bool {
        !matches!(self.delta_source, DeltaSource::SampledLowerBound { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n, k) = (self.m, self.n, self.k);
        if !(1 <= k && k <= m && m <= n) {
            return Err(Error::validation(format!(
                "need 1 <= K <= m <= n, got K = {k}, m = {m}, n = {n}"
            )));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::validation(format!(
                "tau = {} must lie in (0, 1]",
                self.tau
            )));
        }
        if let SignalProfile::Impulse { mar_ratio_target } = self.signal_profile {
            validate_impulse(k, mar_ratio_target)?;
        }
        match self.snr_mode {
            SnrMode::Fixed { snr: Some(s), .. } if !(s > 0.0) => {
                return Err(Error::validation(format!("fixed snr {s} must be positive")));
            }
            SnrMode::FromBound { rho0, .. } if !(rho0 > 0.0 && rho0 < 1.0) => {
                return Err(Error::validation(format!(
                    "rho0 = {rho0} must lie in (0, 1)"
                )));
            }
            _ => {}
        }
        let rule = self.snr_mode.rule();
        if let BoundRule::Theorem1 { .. } = rule {
            rule.params(0.5).validate_for_sparsity(k)?;
        }
        let order = 2 * k;
        match self.delta_source {
            DeltaSource::Provided(d) if !(d > 0.0 && d < 1.0) => {
                return Err(Error::validation(format!(
                    "provided delta {d} must lie in (0, 1)"
                )));
            }
            DeltaSource::ExactRic | DeltaSource::SampledLowerBound { .. } if order > n => {
                return Err(Error::validation(format!(
                    "order 2K = {order} exceeds n = {n}"
                )));
            }
            DeltaSource::ExactRic => {
                let count = binomial(n, order);
                if count > DEFAULT_CAP {
                    return Err(Error::Capacity {
                        count,
                        cap: DEFAULT_CAP,
                    });
                }
            }
            DeltaSource::SampledLowerBound {
                allow_non_certified: false,
                ..
            } => {
                return Err(Error::validation(
                    "a sampled lower bound on delta is not a certified input to the bound; \
                     set allow_non_certified to true to use it anyway",
                ));
            }
            DeltaSource::SampledLowerBound { samples: 0, .. } => {
                return Err(Error::validation("samples must be at least 1"));
            }
            _ => {}
        }
        Ok(())
    }
}

fn validate_impulse(k: usize, target: f64) -> Result<()> {
    if !(target >= 1.0) || !target.is_finite() {
        return Err(Error::validation(format!(
            "impulse mar_ratio target {target} must be at least 1"
        )));
    }
    if k == 1 && target != 1.0 {
        return Err(Error::validation(
            "a 1-sparse signal always has mar_ratio 1",
        ));
    }
    Ok(())
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const MATRIX_TAG: u8 = b'M';
pub const SIGNAL_TAG: u8 = b'S';
pub const NOISE_TAG: u8 = b'N';

/// `seed ^ splitmix64((trial << 8) | tag)`.
pub fn derive_seed(seed: u64, trial: usize, tag: u8) -> u64 {
    seed ^ splitmix64(((trial as u64) << 8) | tag as u64)
}

pub fn gen_matrix(
    m: usize,
    n: usize,
    seed: u64,
    ensemble: Ensemble,
    normalize_columns: bool,
) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::validation(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = match ensemble {
        Ensemble::Gaussian => {
            let scale = 1.0 / (m as f64).sqrt();
            DenseMatrix::from_fn(m, n, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            })
        }
    };
    if normalize_columns {
        for j in 0..n {
            let c = phi.column_norm_sq(j).sqrt();
            if c == 0.0 {
                return Err(Error::degenerate(&[j]));
            }
            phi.scale_column(j, 1.0 / c);
        }
    }
    Ok(phi)
}

pub fn gen_signal(n: usize, k: usize, profile: SignalProfile, seed: u64) -> Result<Vec<f64>> {
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "sparsity {k} must lie in [1, n = {n}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = sample(&mut rng, n, k).into_vec();
    let mut x = vec![0.0; n];
    let sign = |rng: &mut ChaCha8Rng| if rng.gen::<bool>() { 1.0 } else { -1.0 };
    match profile {
        SignalProfile::Equal => {
            for &i in &support {
                x[i] = sign(&mut rng);
            }
        }
        SignalProfile::GaussianMagnitudes => {
            for &i in &support {
                let mut v: f64 = StandardNormal.sample(&mut rng);
                while v.abs() < 1e-6 {
                    v = StandardNormal.sample(&mut rng);
                }
                x[i] = v;
            }
        }
        SignalProfile::Impulse { mar_ratio_target } => {
            validate_impulse(k, mar_ratio_target)?;
            // (a^2 + K - 1) / K = t^2
            let kf = k as f64;
            let a = (kf * mar_ratio_target * mar_ratio_target - kf + 1.0).sqrt();
            for (pos, &i) in support.iter().enumerate() {
                let mag = if pos == 0 { a } else { 1.0 };
                x[i] = mag * sign(&mut rng);
            }
        }
    }
    Ok(x)
}

/// Returns `(y, v)` with `||Phi x||^2 / ||v||^2 = snr_target`. An infinite
/// target gives `v = 0`.
pub fn inject_noise(
    phi: &DenseMatrix,
    x: &[f64],
    snr_target: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(snr_target > 0.0) {
        return Err(Error::validation(format!(
            "target snr {snr_target} must be positive"
        )));
    }
    let clean = matvec(phi, x)?;
    let signal_norm = norm(&clean);
    if signal_norm == 0.0 {
        return Err(Error::validation("Phi x = 0, so the snr is undefined"));
    }
    if snr_target.is_infinite() {
        return Ok((clean, vec![0.0; phi.rows()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..phi.rows())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let scale = signal_norm / (snr_target.sqrt() * norm(&g));
    let v: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
    let y = clean.iter().zip(&v).map(|(a, b)| a + b).collect();
    Ok((y, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub matrix_seed: u64,
    pub signal_seed: u64,
    pub noise_seed: u64,
    pub delta_used: f64,
    pub snr_target: f64,
    pub snr_realized: f64,
    pub mar_ratio: f64,
    pub rho_error: f64,
    pub bound_headline: f64,
    pub violated: bool,
    /// Not part of the records CSV.
    pub bound_full: f64,
    /// `x_tau` of the missed set after the final iteration.
    pub x_tau: f64,
}

pub const RECORDS_HEADER: &str = "trial_index,matrix_seed,signal_seed,noise_seed,delta_used,snr_target,snr_realized,mar_ratio,rho_error,bound_headline,violated";

impl TrialRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.trial_index,
            self.matrix_seed,
            self.signal_seed,
            self.noise_seed,
            self.delta_used,
            self.snr_target,
            self.snr_realized,
            self.mar_ratio,
            self.rho_error,
            self.bound_headline,
            self.violated
        )
    }
}

/// Violations are counted against the headline bound with this much slack.
pub const VIOLATION_SLACK: f64 = 1e-12;

/// Outcome of one solve against a known signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub snr_realized: f64,
    pub mar_ratio: f64,
    pub rho_error: f64,
    pub bound_headline: f64,
    pub bound_full: f64,
    pub violated: bool,
    pub x_tau: f64,
}

/// Adds noise at `snr_target`, runs OMP with the true sparsity, and compares
/// the error rate with `rule`'s bound at `delta`. A `delta >= 1` leaves the
/// bound undefined; it is then reported as infinite and never violated.
pub fn evaluate_trial(
    phi: &DenseMatrix,
    x: &[f64],
    delta: f64,
    snr_target: f64,
    noise_seed: u64,
    rule: BoundRule,
    tau: f64,
) -> Result<TrialOutcome> {
    let true_support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let (y, v) = inject_noise(phi, x, snr_target, noise_seed)?;
    let noise_energy = norm_sq(&v);
    let snr_realized = if noise_energy == 0.0 {
        f64::INFINITY
    } else {
        norm_sq(&matvec(phi, x)?) / noise_energy
    };
    let problem = Problem::new(phi.clone(), y, true_support.len())?;
    let out = omp_run(&problem)?;
    let rho_error = error_rate(&true_support, &out.support)?;
    let stats = SignalStats::of_signal(x, snr_realized)?;
    let (bound_headline, bound_full) = if delta < 1.0 {
        let b = error_rate_bound(&rule.coefficients(delta)?, &stats)?;
        (b.headline, b.full)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let missed = missed_set_stats(x, &true_support, &out.support, tau)?;
    Ok(TrialOutcome {
        snr_realized,
        mar_ratio: stats.mar_ratio,
        rho_error,
        bound_headline,
        bound_full,
        violated: rho_error > bound_headline + VIOLATION_SLACK,
        x_tau: missed.x_tau,
    })
}

pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialRecord> {
    let matrix_seed = derive_seed(config.seed, trial_index, MATRIX_TAG);
    let signal_seed = derive_seed(config.seed, trial_index, SIGNAL_TAG);
    let noise_seed = derive_seed(config.seed, trial_index, NOISE_TAG);
    let phi = gen_matrix(
        config.m,
        config.n,
        matrix_seed,
        config.ensemble,
        config.normalize_columns,
    )?;
    let delta = match config.delta_source {
        DeltaSource::ExactRic => ric_exact(&phi, 2 * config.k, DEFAULT_CAP)?.delta,
        DeltaSource::Provided(d) => d,
        DeltaSource::SampledLowerBound { samples, .. } => {
            ric_sampled_lower_bound(&phi, 2 * config.k, samples, matrix_seed)?.delta
        }
    };
    let x = gen_signal(config.n, config.k, config.signal_profile, signal_seed)?;
    let snr_target = match config.snr_mode {
        SnrMode::Fixed { snr, .. } => snr.unwrap_or(f64::INFINITY),
        SnrMode::FromBound { rule, rho0 } => {
            if delta >= 1.0 {
                return Err(Error::domain(format!(
                    "delta_2K = {delta} >= 1: the restricted isometry property fails and no SNR satisfies the bound"
                )));
            }
            let stats = SignalStats::of_signal(&x, f64::INFINITY)?;
            required_snr(rule, delta, rho0, stats.mar)?.snr
        }
    };
    let o = evaluate_trial(
        &phi,
        &x,
        delta,
        snr_target,
        noise_seed,
        config.snr_mode.rule(),
        config.tau,
    )?;
    Ok(TrialRecord {
        trial_index,
        matrix_seed,
        signal_seed,
        noise_seed,
        delta_used: delta,
        snr_target,
        snr_realized: o.snr_realized,
        mar_ratio: o.mar_ratio,
        rho_error: o.rho_error,
        bound_headline: o.bound_headline,
        violated: o.violated,
        bound_full: o.bound_full,
        x_tau: o.x_tau,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub trials_run: usize,
    pub mean_rho_error: f64,
    pub max_rho_error: f64,
    /// Trials whose error rate exceeds the headline bound.
    pub violation_count: usize,
    /// Trials whose error rate exceeds the full bound, among those where it is below 1.
    pub violation_count_full: usize,
    pub full_bound_evaluated: usize,
    pub mean_x_tau: f64,
    /// False when delta came from a sampled lower bound.
    pub certified: bool,
}

pub const SUMMARY_HEADER: &str =
    "trials_run,mean_rho_error,max_rho_error,violation_count,violation_count_full,full_bound_evaluated,mean_x_tau,certified";

impl SweepSummary {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trials_run,
            self.mean_rho_error,
            self.max_rho_error,
            self.violation_count,
            self.violation_count_full,
            self.full_bound_evaluated,
            self.mean_x_tau,
            self.certified
        )
    }

    pub fn to_text(&self) -> String {
        use crate::fmt::text;
        let mut s = String::new();
        let _ = writeln!(s, "trials run:             {}", self.trials_run);
        let _ = writeln!(s, "mean error rate:        {}", text(self.mean_rho_error));
        let _ = writeln!(s, "max error rate:         {}", text(self.max_rho_error));
        let _ = writeln!(s, "headline violations:    {}", self.violation_count);
        let _ = writeln!(
            s,
            "full-bound violations:  {} (of {} trials with full bound < 1)",
            self.violation_count_full, self.full_bound_evaluated
        );
        let _ = writeln!(s, "mean final x_tau:       {}", text(self.mean_x_tau));
        if !self.certified {
            let _ = writeln!(s, "NON-CERTIFIED: delta is a sampled lower bound");
        }
        s
    }
}

/// Streaming aggregation over records.
#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    sum_rho: f64,
    max_rho: f64,
    violations: usize,
    violations_full: usize,
    full_evaluated: usize,
    sum_x_tau: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            n: 0,
            sum_rho: 0.0,
            max_rho: 0.0,
            violations: 0,
            violations_full: 0,
            full_evaluated: 0,
            sum_x_tau: 0.0,
        }
    }

    fn push(&mut self, r: &TrialRecord) {
        self.n += 1;
        self.sum_rho += r.rho_error;
        self.max_rho = self.max_rho.max(r.rho_error);
        self.violations += usize::from(r.violated);
        if r.bound_full < 1.0 {
            self.full_evaluated += 1;
            self.violations_full += usize::from(r.rho_error > r.bound_full + VIOLATION_SLACK);
        }
        self.sum_x_tau += r.x_tau;
    }

    fn finish(&self, certified: bool) -> SweepSummary {
        let n = self.n.max(1) as f64;
        SweepSummary {
            trials_run: self.n,
            mean_rho_error: self.sum_rho / n,
            max_rho_error: self.max_rho,
            violation_count: self.violations,
            violation_count_full: self.violations_full,
            full_bound_evaluated: self.full_evaluated,
            mean_x_tau: self.sum_x_tau / n,
            certified,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: SweepSummary,
}

/// Trials are evaluated this many at a time; each block is merged in trial
/// order before the next starts.
const BLOCK: usize = 64;

fn run_block(
    config: &ExperimentConfig,
    range: std::ops::Range<usize>,
    threads: Option<usize>,
) -> Result<Vec<TrialRecord>> {
    run_indices(config, range, threads).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn run_indices(
    config: &ExperimentConfig,
    range: std::ops::Range<usize>,
    threads: Option<usize>,
) -> Vec<Result<TrialRecord>> {
    use rayon::prelude::*;
    let run = || {
        range
            .clone()
            .into_par_iter()
            .map(|i| tag_trial(i, run_trial(config, i)))
            .collect()
    };
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_indices(
    config: &ExperimentConfig,
    range: std::ops::Range<usize>,
    _threads: Option<usize>,
) -> Vec<Result<TrialRecord>> {
    range.map(|i| tag_trial(i, run_trial(config, i))).collect()
}

fn tag_trial(index: usize, r: Result<TrialRecord>) -> Result<TrialRecord> {
    r.map_err(|e| Error::Trial {
        index,
        source: Box::new(e),
    })
}

/// Runs every trial with at most `threads` workers (`None`: all available)
/// and feeds each completed block of records to `sink` in trial order.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    threads: Option<usize>,
    mut sink: impl FnMut(&[TrialRecord]) -> Result<()>,
) -> Result<SweepOutput> {
    config.validate()?;
    let mut acc = Accumulator::new();
    let mut records = Vec::with_capacity(config.trials);
    let mut start = 0;
    while start < config.trials {
        let end = (start + BLOCK).min(config.trials);
        let block = run_block(config, start..end, threads)?;
        sink(&block)?;
        for r in &block {
            acc.push(r);
        }
        records.extend(block);
        start = end;
    }
    Ok(SweepOutput {
        records,
        summary: acc.finish(config.certified()),
    })
}

pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepOutput> {
    run_sweep_with(config, threads, |_| Ok(()))
}

/// Runs the sweep, writing `records.csv` block by block as trials complete,
/// then `summary.txt` and `summary.csv`.
pub fn run_sweep_to_dir(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<SweepOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut records_file = BufWriter::new(File::create(out_dir.join("records.csv"))?);
    writeln!(records_file, "{RECORDS_HEADER}")?;
    let out = run_sweep_with(config, threads, |block| {
        for r in block {
            writeln!(records_file, "{}", r.csv_line())?;
        }
        records_file.flush()?;
        Ok(())
    })?;
    fs::write(out_dir.join("summary.txt"), out.summary.to_text())?;
    fs::write(
        out_dir.join("summary.csv"),
        format!("{SUMMARY_HEADER}\n{}\n", out.summary.csv_line()),
    )?;
    Ok(out)
}

pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut s = format!("{RECORDS_HEADER}\n");
    for r in records {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub trials: usize,
    pub headline_violations: usize,
    pub full_violations: usize,
    pub full_evaluated: usize,
    pub mean_rho_error: f64,
    pub max_rho_error: f64,
    /// Target error rate when the sweep ran in from-bound mode.
    pub rho0: Option<f64>,
    /// The summary's totals agree with a fresh pass over the records.
    pub matches_summary: bool,
}

impl VerificationReport {
    pub fn to_text(&self) -> String {
        use crate::fmt::text;
        let mut s = String::new();
        let rate = |c: usize| text(c as f64 / self.trials.max(1) as f64);
        let _ = writeln!(
            s,
            "headline-bound violations: {} / {} ({})",
            self.headline_violations,
            self.trials,
            rate(self.headline_violations)
        );
        let _ = writeln!(
            s,
            "full-bound violations:     {} / {} evaluated",
            self.full_violations, self.full_evaluated
        );
        let _ = write!(
            s,
            "mean error rate {} (max {})",
            text(self.mean_rho_error),
            text(self.max_rho_error)
        );
        if let Some(r) = self.rho0 {
            let verdict = if self.mean_rho_error <= r { "<=" } else { ">" };
            let _ = write!(s, " {verdict} rho0 = {}", text(r));
        }
        s.push('\n');
        if !self.matches_summary {
            s.push_str("WARNING: summary totals disagree with the records\n");
        }
        s
    }
}

/// Re-aggregates `records` independently of the streaming summary.
pub fn verify_bound(
    records: &[TrialRecord],
    summary: &SweepSummary,
    rho0: Option<f64>,
) -> VerificationReport {
    let headline_violations = records
        .iter()
        .filter(|r| r.rho_error > r.bound_headline + VIOLATION_SLACK)
        .count();
    let full: Vec<&TrialRecord> = records.iter().filter(|r| r.bound_full < 1.0).collect();
    let full_violations = full
        .iter()
        .filter(|r| r.rho_error > r.bound_full + VIOLATION_SLACK)
        .count();
    let mean_rho_error =
        records.iter().map(|r| r.rho_error).sum::<f64>() / records.len().max(1) as f64;
    let max_rho_error = records.iter().map(|r| r.rho_error).fold(0.0, f64::max);
    let matches_summary = summary.trials_run == records.len()
        && summary.violation_count == headline_violations
        && summary.violation_count_full == full_violations
        && summary.full_bound_evaluated == full.len()
        && (summary.mean_rho_error - mean_rho_error).abs() <= 1e-12
        && summary.max_rho_error == max_rho_error;
    VerificationReport {
        trials: records.len(),
        headline_violations,
        full_violations,
        full_evaluated: full.len(),
        mean_rho_error,
        max_rho_error,
        rho0,
        matches_summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            m: 20,
            n: 40,
            k: 3,
            ensemble: Ensemble::Gaussian,
            normalize_columns: true,
            signal_profile: SignalProfile::Equal,
            snr_mode: SnrMode::Fixed {
                snr: Some(30.0),
                rule: BoundRule::Corollary3,
            },
            delta_source: DeltaSource::Provided(0.3),
            trials: 10,
            seed: 7,
            tau: 1.0,
        }
    }

    #[test]
    fn matrix_generation() {
        let a = gen_matrix(6, 9, 3, Ensemble::Gaussian, false).unwrap();
        let b = gen_matrix(6, 9, 3, Ensemble::Gaussian, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_matrix(6, 9, 4, Ensemble::Gaussian, false).unwrap());
        let u = gen_matrix(6, 9, 3, Ensemble::Gaussian, true).unwrap();
        for j in 0..9 {
            assert!((u.column_norm_sq(j).sqrt() - 1.0).abs() < 1e-12);
        }
        assert!(gen_matrix(0, 9, 3, Ensemble::Gaussian, true).is_err());
    }

    #[test]
    fn wide_matrix_sampled_delta() {
        let phi = gen_matrix(64, 128, 2024, Ensemble::Gaussian, true).unwrap();
        let r = ric_sampled_lower_bound(&phi, 2, 500, 1).unwrap();
        assert!(r.delta < 1.0);
        // unit columns: a pair's deviation is |<phi_i, phi_j>|
        let (i, j) = (r.witness[0], r.witness[1]);
        let ip: f64 = (0..64).map(|row| phi.get(row, i) * phi.get(row, j)).sum();
        assert!((r.delta - ip.abs()).abs() < 1e-12);
        // frozen from the first run
        assert_eq!(r.witness, vec![73, 85]);
        assert!((r.delta - 0.3812820315622245).abs() < 1e-12, "{}", r.delta);
    }

    #[test]
    fn error_rate_falls_with_snr() {
        let grid = [1.0, 3.0, 10.0, 30.0, 100.0];
        let means: Vec<f64> = grid
            .iter()
            .map(|&snr| {
                let c = ExperimentConfig {
                    trials: 500,
                    snr_mode: SnrMode::Fixed { snr: Some(snr), rule: BoundRule::Corollary3 },
                    ..config()
                };
                run_sweep(&c, None).unwrap().summary.mean_rho_error
            })
            .collect();
        let inversions: Vec<f64> = means.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] - w[0]).collect();
        assert!(inversions.len() <= 1 && inversions.iter().all(|d| *d <= 0.01), "{means:?}");
        assert!(means[0] > means[4], "{means:?}");
    }

    #[test]
    fn signal_profiles() {
        let x = gen_signal(30, 5, SignalProfile::Equal, 1).unwrap();
        let s = SignalStats::of_signal(&x, 1.0).unwrap();
        assert_eq!(s.sparsity, 5);
        assert_eq!((s.mar_ratio, s.mar), (1.0, 1.0));
        assert_eq!(x, gen_signal(30, 5, SignalProfile::Equal, 1).unwrap());

        let x = gen_signal(
            30,
            2,
            SignalProfile::Impulse {
                mar_ratio_target: 5f64.sqrt(),
            },
            9,
        )
        .unwrap();
        let mut mags: Vec<f64> = x.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
        mags.sort_by(f64::total_cmp);
        assert!((mags[0] - 1.0).abs() < 1e-15 && (mags[1] - 3.0).abs() < 1e-15);

        for t in [1.0, 1.5, 4.0] {
            let x = gen_signal(
                50,
                6,
                SignalProfile::Impulse {
                    mar_ratio_target: t,
                },
                3,
            )
            .unwrap();
            assert!((SignalStats::of_signal(&x, 1.0).unwrap().mar_ratio - t).abs() < 1e-9);
        }
        assert!(gen_signal(
            50,
            6,
            SignalProfile::Impulse {
                mar_ratio_target: 0.9
            },
            3
        )
        .is_err());
        assert!(gen_signal(
            50,
            1,
            SignalProfile::Impulse {
                mar_ratio_target: 2.0
            },
            3
        )
        .is_err());

        let x = gen_signal(40, 8, SignalProfile::GaussianMagnitudes, 5).unwrap();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 8);
        assert!(x.iter().all(|v| *v == 0.0 || v.abs() >= 1e-6));
        assert!(gen_signal(4, 5, SignalProfile::Equal, 1).is_err());
    }

    #[test]
    fn noise_scaling() {
        let phi = gen_matrix(10, 20, 1, Ensemble::Gaussian, true).unwrap();
        let x = gen_signal(20, 3, SignalProfile::Equal, 2).unwrap();
        let clean = matvec(&phi, &x).unwrap();

        let (y, v) = inject_noise(&phi, &x, f64::INFINITY, 3).unwrap();
        assert_eq!(y, clean);
        assert!(v.iter().all(|e| *e == 0.0));

        let s = 12.5;
        let (_, v1) = inject_noise(&phi, &x, s, 3).unwrap();
        let realized = norm_sq(&clean) / norm_sq(&v1);
        assert!((realized / s - 1.0).abs() < 1e-12);

        let (_, v4) = inject_noise(&phi, &x, 4.0 * s, 3).unwrap();
        for (a, b) in v1.iter().zip(&v4) {
            assert!((a - 2.0 * b).abs() < 1e-14);
        }
        assert!(inject_noise(&phi, &[0.0; 20], s, 3).is_err());
        assert!(inject_noise(&phi, &x, 0.0, 3).is_err());
    }

    #[test]
    fn seed_derivation() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let a = derive_seed(42, 0, MATRIX_TAG);
        assert_ne!(a, derive_seed(42, 0, SIGNAL_TAG));
        assert_ne!(a, derive_seed(42, 1, MATRIX_TAG));
        assert_eq!(a, 42 ^ splitmix64(u64::from(b'M')));
    }

    #[test]
    fn noiseless_orthonormal_trial() {
        let phi = DenseMatrix::identity(8);
        let mut x = vec![0.0; 8];
        x[2] = 1.0;
        x[5] = -1.0;
        for rule in [
            BoundRule::Corollary1,
            BoundRule::Corollary2,
            BoundRule::Corollary3,
            BoundRule::THEOREM1_DEFAULT,
        ] {
            let o = evaluate_trial(&phi, &x, 0.0, f64::INFINITY, 1, rule, 1.0);
            // corollary 1 and 2 coefficients divide by delta
            match rule {
                BoundRule::Corollary1 | BoundRule::Corollary2 => {
                    let o = evaluate_trial(&phi, &x, 1e-9, f64::INFINITY, 1, rule, 1.0).unwrap();
                    assert_eq!(o.rho_error, 0.0);
                    assert!(!o.violated);
                }
                _ => {
                    let o = o.unwrap();
                    assert_eq!(o.rho_error, 0.0);
                    assert_eq!(o.bound_headline, 0.0);
                    assert!(!o.violated);
                }
            }
        }
    }

    #[test]
    fn config_json() {
        let text = r#"{
            "m": 14, "n": 18, "K": 2, "ensemble": "gaussian", "normalize_columns": true,
            "signal_profile": "equal",
            "snr_mode": {"from_bound": {"rule": {"theorem1": {"theta1": 0.5, "theta2": null, "tau": 1.0}}, "rho0": 0.5}},
            "delta_source": "exact_ric", "trials": 500, "seed": 42, "tau": 1.0
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.k, 2);
        assert_eq!(
            cfg.snr_mode,
            SnrMode::FromBound {
                rule: BoundRule::THEOREM1_DEFAULT,
                rho0: 0.5
            }
        );
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);

        let unknown = text.replace("\"seed\": 42", "\"seed\": 42, \"extra\": 1");
        assert!(matches!(
            ExperimentConfig::from_json(&unknown),
            Err(Error::Parse { .. })
        ));
        let lower = text.replace("\"K\"", "\"k\"");
        assert!(ExperimentConfig::from_json(&lower).is_err());

        let fixed = r#"{"m": 8, "n": 8, "K": 2, "ensemble": "gaussian", "normalize_columns": false,
            "signal_profile": {"impulse": {"mar_ratio_target": 2.0}},
            "snr_mode": {"fixed": {"snr": null}}, "delta_source": {"provided": 0.2},
            "trials": 1, "seed": 0, "tau": 0.5}"#;
        let cfg = ExperimentConfig::from_json(fixed).unwrap();
        assert_eq!(
            cfg.snr_mode,
            SnrMode::Fixed {
                snr: None,
                rule: BoundRule::Corollary3
            }
        );
    }

    #[test]
    fn config_validation() {
        let mut c = config();
        c.k = 0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.m = 50;
        assert!(c.validate().is_err());
        let mut c = config();
        c.delta_source = DeltaSource::Provided(1.0);
        assert!(c.validate().is_err());
        let mut c = config();
        c.delta_source = DeltaSource::ExactRic;
        assert!(matches!(c.validate(), Err(Error::Capacity { .. })));
        let mut c = config();
        c.delta_source = DeltaSource::SampledLowerBound {
            samples: 100,
            allow_non_certified: false,
        };
        assert!(c.validate().is_err());
        c.delta_source = DeltaSource::SampledLowerBound {
            samples: 100,
            allow_non_certified: true,
        };
        assert!(c.validate().is_ok());
        assert!(!c.certified());
        let mut c = config();
        c.snr_mode = SnrMode::FromBound {
            rule: BoundRule::Theorem1 {
                theta1: 0.5,
                theta2: f64::INFINITY,
                tau: 0.5,
            },
            rho0: 0.5,
        };
        assert!(c.validate().is_err());
        c.snr_mode = SnrMode::FromBound {
            rule: BoundRule::Corollary3,
            rho0: 1.0,
        };
        assert!(c.validate().is_err());
        let mut c = config();
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_records_are_consistent() {
        let mut c = config();
        c.trials = 70;
        let out = run_sweep(&c, Some(2)).unwrap();
        assert_eq!(out.records.len(), 70);
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.trial_index, i);
            assert!((r.snr_realized / r.snr_target - 1.0).abs() <= 1e-9);
            let scaled = r.rho_error * c.k as f64;
            assert!((scaled - scaled.round()).abs() < 1e-12);
            assert_eq!(r, &run_trial(&c, i).unwrap());
        }
        let report = verify_bound(&out.records, &out.summary, None);
        assert!(report.matches_summary);
        assert_eq!(report.headline_violations, out.summary.violation_count);
    }

    #[test]
    fn rip_failure_aborts_from_bound_sweep() {
        let c = ExperimentConfig {
            m: 4,
            n: 8,
            k: 2,
            snr_mode: SnrMode::FromBound {
                rule: BoundRule::Corollary3,
                rho0: 0.5,
            },
            delta_source: DeltaSource::ExactRic,
            trials: 3,
            ..config()
        };
        match run_sweep(&c, None) {
            Err(Error::Trial { index: 0, source }) => assert!(matches!(*source, Error::Domain(_))),
            other => panic!("unexpected {other:?}"),
        }
        // with a fixed SNR the bound is reported as vacuous instead
        let c = ExperimentConfig {
            snr_mode: SnrMode::Fixed {
                snr: Some(10.0),
                rule: BoundRule::Corollary3,
            },
            ..c
        };
        let out = run_sweep(&c, None).unwrap();
        assert!(out
            .records
            .iter()
            .all(|r| r.delta_used >= 1.0 && r.bound_headline.is_infinite() && !r.violated));
    }

    #[test]
    fn verify_counts() {
        let base = TrialRecord {
            trial_index: 0,
            matrix_seed: 0,
            signal_seed: 0,
            noise_seed: 0,
            delta_used: 0.3,
            snr_target: 10.0,
            snr_realized: 10.0,
            mar_ratio: 1.0,
            rho_error: 0.0,
            bound_headline: 0.5,
            violated: false,
            bound_full: 2.0,
            x_tau: 0.0,
        };
        let mut acc = Accumulator::new();
        acc.push(&base);
        let s = acc.finish(true);
        let r = verify_bound(std::slice::from_ref(&base), &s, Some(0.5));
        assert_eq!(
            (r.headline_violations, r.full_violations, r.full_evaluated),
            (0, 0, 0)
        );
        assert!(r.matches_summary);

        let bad = TrialRecord {
            rho_error: 1.0,
            violated: true,
            bound_full: 0.8,
            ..base.clone()
        };
        let mut acc = Accumulator::new();
        acc.push(&base);
        acc.push(&bad);
        let s = acc.finish(true);
        let r = verify_bound(&[base, bad], &s, Some(0.5));
        assert_eq!(
            (r.headline_violations, r.full_violations, r.full_evaluated),
            (1, 1, 1)
        );
        assert_eq!(s.violation_count, 1);
        assert!(r.matches_summary);
        assert!(r.to_text().contains("1 / 2"));
    }

    #[test]
    fn records_csv_layout() {
        let out = run_sweep(
            &ExperimentConfig {
                trials: 2,
                ..config()
            },
            Some(1),
        )
        .unwrap();
        let csv = records_csv(&out.records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RECORDS_HEADER);
        assert_eq!(lines.len(), 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[8].parse::<f64>().unwrap(), out.records[0].rho_error);
        assert_eq!(
            fields[6].parse::<f64>().unwrap(),
            out.records[0].snr_realized
        );
    }
}
