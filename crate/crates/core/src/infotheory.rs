//! Information-theoretic limits on approximate support recovery: binary
//! entropy in nats, the necessary SNR / sampling rate, and the sufficient
//! recovery region for a target error rate `rho0`.
//!
//! For deterministic signals the mutual-information term in the necessary
//! condition is zero and is not modeled.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// `h(x) = -x ln x - (1-x) ln(1-x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.ln() };
    Ok(term(x) + term(1.0 - x))
}

/// `h(x, y) = x h(y) + (1 - x) h(y / (1/x - 1))`.
pub fn joint_entropy(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!(
            "first argument {x} must lie in (0, 1)"
        )));
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!("second argument {y} outside [0, 1]")));
    }
    let inner = y / (1.0 / x - 1.0);
    if !(0.0..=1.0).contains(&inner) {
        return Err(Error::domain(format!(
            "inner argument y/(1/x - 1) = {inner} outside [0, 1] (x = {x}, y = {y})"
        )));
    }
    Ok(x * binary_entropy(y)? + (1.0 - x) * binary_entropy(inner)?)
}

fn validate_dims(n: usize, m: usize, k: usize) -> Result<()> {
    if !(k < m && m < n) {
        return Err(Error::validation(format!(
            "need K < m < n, got K = {k}, m = {m}, n = {n}"
        )));
    }
    Ok(())
}

/// `h(K/n) - h(K/n, rho0)`, the per-dimension entropy that must be resolved.
fn entropy_gap(n: usize, k: usize, rho0: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho0) {
        return Err(Error::domain(format!("rho0 = {rho0} must lie in [0, 1)")));
    }
    let sparsity_ratio = k as f64 / n as f64;
    Ok(binary_entropy(sparsity_ratio)? - joint_entropy(sparsity_ratio, rho0)?)
}

/// Smallest SNR compatible with error rate `rho0` at `m` measurements:
/// `exp((2n/m)(h(K/n) - h(K/n, rho0))) - 1`. `rho0 = 0` is allowed.
pub fn necessary_snr(n: usize, m: usize, k: usize, rho0: f64) -> Result<f64> {
    validate_dims(n, m, k)?;
    let gap = entropy_gap(n, k, rho0)?;
    Ok((2.0 * n as f64 / m as f64 * gap).exp() - 1.0)
}

/// Smallest sampling rate `m/n` compatible with error rate `rho0` at a given SNR:
/// `(h(K/n) - h(K/n, rho0)) / (ln(1 + snr) / 2)`.
pub fn min_sampling_rate(n: usize, k: usize, rho0: f64, snr: f64) -> Result<f64> {
    if !(k < n) {
        return Err(Error::validation(format!(
            "need K < n, got K = {k}, n = {n}"
        )));
    }
    if !(snr > 0.0) {
        return Err(Error::domain(format!("snr = {snr} must be positive")));
    }
    Ok(entropy_gap(n, k, rho0)? / (0.5 * snr.ln_1p()))
}

/// `4 / (exp((2n/m) h(K/n)) - 1)`: every `rho0` up to this value keeps the
/// `C1 = 4/(1-delta)` requirement above the necessary SNR. Values `>= 1` admit
/// every `rho0 in (0, 1)`.
pub fn feasibility_rho_max(n: usize, m: usize, k: usize) -> Result<f64> {
    validate_dims(n, m, k)?;
    let h = binary_entropy(k as f64 / n as f64)?;
    Ok(4.0 / ((2.0 * n as f64 / m as f64 * h).exp() - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryRegime {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho0: f64,
    pub snr: f64,
}

impl RecoveryRegime {
    pub fn validate(&self) -> Result<()> {
        validate_dims(self.n, self.m, self.k)?;
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return Err(Error::domain(format!(
                "rho0 = {} must lie in (0, 1)",
                self.rho0
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::domain(format!(
                "snr = {} must be positive",
                self.snr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficiencyReport {
    /// `snr * rho0 >= e`.
    pub condition1: bool,
    /// `m/n > K/n + 2 h(K/n) / ln(snr rho0 / e)`; false when the log is not positive.
    pub condition2: bool,
    /// Set when condition 2 could not be evaluated.
    pub condition2_note: Option<String>,
    /// `exp(2n h(K/n) / (m - K) + 1)`: the bound `snr * rho0` must exceed at this rate.
    pub snr_rho_threshold: f64,
    /// `snr * rho0 > snr_rho_threshold`.
    pub meets_threshold: bool,
    /// `snr_rho_threshold < 4`: the `C1 = 4/(1-delta)` requirement alone clears it.
    pub threshold_below_four: bool,
}

pub fn sufficient_region(regime: &RecoveryRegime) -> Result<SufficiencyReport> {
    regime.validate()?;
    let RecoveryRegime { n, m, k, rho0, snr } = *regime;
    let (nf, mf, kf) = (n as f64, m as f64, k as f64);
    let h = binary_entropy(kf / nf)?;
    let product = snr * rho0;

    let condition1 = product >= E;
    let log_term = (product / E).ln();
    let (condition2, condition2_note) = if log_term > 0.0 {
        (mf / nf > kf / nf + 2.0 * h / log_term, None)
    } else {
        (
            false,
            Some(format!(
                "ln(snr * rho0 / e) = {log_term} is not positive; the rate condition is undefined"
            )),
        )
    };
    let snr_rho_threshold = (2.0 * nf * h / (mf - kf) + 1.0).exp();
    Ok(SufficiencyReport {
        condition1,
        condition2,
        condition2_note,
        snr_rho_threshold,
        meets_threshold: product > snr_rho_threshold,
        threshold_below_four: snr_rho_threshold < 4.0,
    })
}
