//! Orthogonal matching pursuit with a full per-iteration trace.
//!
//! Each iteration picks the column most correlated with the current residual
//! (smallest index on ties), re-fits the measurements by least squares on the
//! enlarged support, and records the residual energy. The solver always runs
//! exactly `K` iterations.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numkernel::{least_squares_on_support, norm_sq, validate_index_set, DenseMatrix};

/// Solver input: measurement matrix, measurements, sparsity budget.
#[derive(Debug, Clone)]
pub struct Problem {
    phi: DenseMatrix,
    y: Vec<f64>,
    sparsity: usize,
}

impl Problem {
    pub fn new(phi: DenseMatrix, y: Vec<f64>, sparsity: usize) -> Result<Self> {
        if y.len() != phi.rows() {
            return Err(Error::validation(format!(
                "measurement vector has length {}, matrix has {} rows",
                y.len(),
                phi.rows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "measurement vector has a non-finite entry",
            ));
        }
        if sparsity == 0 || sparsity > phi.rows().min(phi.cols()) {
            return Err(Error::validation(format!(
                "sparsity {sparsity} must lie in [1, min(m, n)] = [1, {}]",
                phi.rows().min(phi.cols())
            )));
        }
        Ok(Self { phi, y, sparsity })
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub k: usize,
    pub chosen_index: usize,
    /// `||Phi' r^(k-1)||_inf` over all columns.
    pub max_abs_correlation: f64,
    /// `||r^k||_2^2` after the re-fit.
    pub residual_norm_sq: f64,
    /// Least-squares coefficients on the support, in selection order.
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    pub x_hat: Vec<f64>,
    /// `||r^0||_2^2 = ||y||_2^2`.
    pub initial_residual_norm_sq: f64,
    pub residual: Vec<f64>,
    pub trace: Vec<IterationRecord>,
}

impl OmpOutput {
    pub fn sorted_support(&self) -> Vec<usize> {
        let mut s = self.support.clone();
        s.sort_unstable();
        s
    }

    /// Trace CSV: `k,chosen_index,max_abs_correlation,residual_norm_sq`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("k,chosen_index,max_abs_correlation,residual_norm_sq\n");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.k, r.chosen_index, r.max_abs_correlation, r.residual_norm_sq
            );
        }
        out
    }
}

/// Index of the non-excluded column maximizing `|<phi_i, r>|`.
pub fn select_index(phi: &DenseMatrix, r: &[f64], excluded: &[usize]) -> Result<usize> {
    if r.len() != phi.rows() {
        return Err(Error::validation(format!(
            "residual has length {}, matrix has {} rows",
            r.len(),
            phi.rows()
        )));
    }
    let correlations = phi.transpose_matvec(r)?;
    argmax_excluding(&correlations, excluded)
        .ok_or_else(|| Error::validation("every column is excluded from selection"))
}

fn argmax_excluding(correlations: &[f64], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in correlations.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        let c = c.abs();
        // strict comparison keeps the smallest index on ties
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

pub fn omp_run(problem: &Problem) -> Result<OmpOutput> {
    let phi = &problem.phi;
    let y = &problem.y;
    let mut support: Vec<usize> = Vec::with_capacity(problem.sparsity);
    let mut residual = y.clone();
    let mut coeffs = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::with_capacity(problem.sparsity);

    for k in 1..=problem.sparsity {
        let correlations = phi.transpose_matvec(&residual)?;
        let max_abs_correlation = correlations.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let chosen = argmax_excluding(&correlations, &support)
            .expect("sparsity never exceeds the column count");
        support.push(chosen);

        let ls = match least_squares_on_support(phi, y, &support) {
            Ok(ls) => ls,
            Err(Error::Degenerate { subset, .. }) => {
                return Err(Error::Degenerate {
                    subset,
                    partial_trace: trace,
                });
            }
            Err(e) => return Err(e),
        };
        residual = ls.residual;
        coeffs = ls.coeffs;
        trace.push(IterationRecord {
            k,
            chosen_index: chosen,
            max_abs_correlation,
            residual_norm_sq: norm_sq(&residual),
            estimate: coeffs.clone(),
        });
    }

    let mut x_hat = vec![0.0; phi.cols()];
    for (&j, &c) in support.iter().zip(&coeffs) {
        x_hat[j] = c;
    }
    Ok(OmpOutput {
        support,
        x_hat,
        initial_residual_norm_sq: norm_sq(y),
        residual,
        trace,
    })
}

/// Missed-detection quantities after some iteration: the missed set, its
/// `ceil(tau K)` largest-magnitude members, and the magnitude of the last of those.
#[derive(Debug, Clone, PartialEq)]
pub struct MissedSetStats {
    pub gamma: Vec<usize>,
    pub gamma_tau: Vec<usize>,
    pub x_tau: f64,
    pub tau: f64,
}

/// `ceil(tau * k)`, treating products within 1e-9 of an integer as that integer.
pub fn ceil_tau_k(tau: f64, k: usize) -> usize {
    let t = tau * k as f64;
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as usize
    } else {
        t.ceil() as usize
    }
}

pub fn missed_set_stats(
    x: &[f64],
    true_support: &[usize],
    estimated_support: &[usize],
    tau: f64,
) -> Result<MissedSetStats> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::validation(format!("tau = {tau} must lie in (0, 1]")));
    }
    validate_index_set(true_support, x.len())?;
    validate_index_set(estimated_support, usize::MAX)?;
    let mut supp: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let mut given = true_support.to_vec();
    given.sort_unstable();
    supp.sort_unstable();
    if given != supp {
        return Err(Error::validation(
            "true support does not match the nonzero entries of x",
        ));
    }

    let mut gamma: Vec<usize> = given
        .iter()
        .copied()
        .filter(|i| !estimated_support.contains(i))
        .collect();
    gamma.sort_unstable();
    let need = ceil_tau_k(tau, true_support.len());

    let mut by_magnitude = gamma.clone();
    by_magnitude.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let (gamma_tau, x_tau) = if need > gamma.len() {
        (gamma.clone(), 0.0)
    } else {
        let mut top = by_magnitude[..need].to_vec();
        let x_tau = if need == 0 {
            0.0
        } else {
            x[top[need - 1]].abs()
        };
        top.sort_unstable();
        (top, x_tau)
    };
    Ok(MissedSetStats {
        gamma,
        gamma_tau,
        x_tau,
        tau,
    })
}

/// Checks, per iteration, `||r^(k-1)||^2 - ||r^k||^2 >= ||Phi' r^(k-1)||_inf^2 / (1 + delta1)`
/// with absolute slack `1e-10 * max(1, ||y||^2)`.
pub fn lemma1_diagnostic(output: &OmpOutput, delta1: f64) -> Result<Vec<bool>> {
    if !(delta1 >= 0.0) || !delta1.is_finite() {
        return Err(Error::validation(format!(
            "delta1 = {delta1} must be a finite nonnegative number"
        )));
    }
    if output.trace.iter().enumerate().any(|(i, r)| r.k != i + 1) {
        return Err(Error::validation("trace iterations are not numbered 1..K"));
    }
    let slack = 1e-10 * output.initial_residual_norm_sq.max(1.0);
    let mut prev = output.initial_residual_norm_sq;
    Ok(output
        .trace
        .iter()
        .map(|rec| {
            let drop = prev - rec.residual_norm_sq;
            prev = rec.residual_norm_sq;
            drop + slack >= rec.max_abs_correlation.powi(2) / (1.0 + delta1)
        })
        .collect())
}
