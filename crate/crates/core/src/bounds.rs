//! Error-rate bounds for OMP support recovery and the SNR they require.
//!
//! Two magnitude statistics of a `K`-sparse signal appear throughout:
//! `mar_ratio = ||x||_2 / (sqrt(K) x_min) >= 1` and its companion
//! `MAR = K x_min^2 / ||x||_2^2 = 1 / mar_ratio^2`, the minimum-to-average ratio,
//! which lies in `(0, 1]`. Bounds take the form `rho_error <= C1 / (snr * MAR)`
//! where `C1` depends on `delta = delta_2K` and the free constants
//! `theta1 in (0, 1)`, `theta2 in (0, inf]`, `tau in (0, 1]`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fmt;
use crate::numkernel::{matvec, norm_sq, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStats {
    pub sparsity: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub mar_ratio: f64,
    /// Minimum-to-average ratio `K x_min^2 / ||x||^2`.
    pub mar: f64,
    /// `||Phi x||^2 / ||v||^2`, infinite when `v = 0`.
    pub snr: f64,
}

impl SignalStats {
    /// Magnitude statistics of `x` with the given SNR attached.
    pub fn of_signal(x: &[f64], snr: f64) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("signal has a non-finite entry"));
        }
        let nonzero: Vec<f64> = x.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
        if nonzero.is_empty() {
            return Err(Error::validation("signal has no nonzero entry"));
        }
        if !(snr >= 0.0) {
            return Err(Error::validation(format!(
                "snr = {snr} must be nonnegative"
            )));
        }
        let k = nonzero.len();
        let x_min = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = nonzero.iter().copied().fold(0.0, f64::max);
        let energy = norm_sq(x);
        let kf = k as f64;
        Ok(Self {
            sparsity: k,
            x_min,
            x_max,
            mar_ratio: energy.sqrt() / (kf.sqrt() * x_min),
            mar: kf * x_min * x_min / energy,
            snr,
        })
    }
}

pub fn signal_stats(x: &[f64], phi: &DenseMatrix, v: &[f64]) -> Result<SignalStats> {
    if v.len() != phi.rows() {
        return Err(Error::validation(format!(
            "noise vector has length {}, matrix has {} rows",
            v.len(),
            phi.rows()
        )));
    }
    let signal_energy = norm_sq(&matvec(phi, x)?);
    let noise_energy = norm_sq(v);
    let snr = if noise_energy == 0.0 {
        f64::INFINITY
    } else {
        signal_energy / noise_energy
    };
    SignalStats::of_signal(x, snr)
}

/// `|estimated \ true| / |true|`.
pub fn error_rate(true_support: &[usize], estimated_support: &[usize]) -> Result<f64> {
    if true_support.is_empty() {
        return Err(Error::validation("true support is empty"));
    }
    let wrong = estimated_support
        .iter()
        .filter(|i| !true_support.contains(i))
        .count();
    Ok(wrong as f64 / true_support.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Stands for `delta_2K`.
    pub delta: f64,
    pub theta1: f64,
    /// May be `f64::INFINITY`.
    pub theta2: f64,
    pub tau: f64,
}

impl BoundParams {
    /// `theta1 = delta, tau = 1, theta2 = inf`.
    pub fn with_theta1_delta(delta: f64) -> Self {
        Self {
            delta,
            theta1: delta,
            theta2: f64::INFINITY,
            tau: 1.0,
        }
    }

    /// `theta1 = 1/2, tau = 1, theta2 = inf`.
    pub fn with_theta1_half(delta: f64) -> Self {
        Self {
            delta,
            theta1: 0.5,
            theta2: f64::INFINITY,
            tau: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!(
                "delta = {} must lie in [0, 1)",
                self.delta
            )));
        }
        if !(self.theta1 > 0.0 && self.theta1 < 1.0) {
            return Err(Error::domain(format!(
                "theta1 = {} must lie in (0, 1)",
                self.theta1
            )));
        }
        if !(self.theta2 > 0.0) {
            return Err(Error::domain(format!(
                "theta2 = {} must be positive",
                self.theta2
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::domain(format!(
                "tau = {} must lie in (0, 1]",
                self.tau
            )));
        }
        Ok(())
    }

    /// `tau * K` must be an integer for the bound to apply at sparsity `K`.
    pub fn validate_for_sparsity(&self, sparsity: usize) -> Result<()> {
        self.validate()?;
        let t = self.tau * sparsity as f64;
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "tau * K = {t} is not an integer (tau = {}, K = {sparsity})",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub fn coefficients(params: &BoundParams) -> Result<Coefficients> {
    params.validate()?;
    let BoundParams {
        delta,
        theta1,
        theta2,
        tau,
    } = *params;
    let inv_theta2 = if theta2.is_infinite() {
        0.0
    } else {
        1.0 / theta2
    };
    let denom = (1.0 - theta1) * (1.0 - delta);
    let c1 = (1.0 / theta1 + inv_theta2 + (1.0 - tau) * (1.0 + delta) / (tau * tau)) / denom;
    let c2 = ((1.0 + theta1) * (1.0 + delta) + 4.0 * tau * (1.0 - delta) / (1.0 + delta)) / denom;
    let c3 = (1.0 - tau) / ((1.0 - theta1) * (1.0 + delta));
    Ok(Coefficients { c1, c2, c3 })
}

/// Upper bounds on the support error rate. `headline = C1 / (snr MAR)`;
/// `full = headline + C2 / MAR - C3` keeps the term the headline drops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRateBound {
    pub headline: f64,
    pub full: f64,
}

impl ErrorRateBound {
    pub fn headline_clamped(&self) -> f64 {
        self.headline.clamp(0.0, 1.0)
    }

    pub fn full_clamped(&self) -> f64 {
        self.full.clamp(0.0, 1.0)
    }
}

pub fn error_rate_bound(coeffs: &Coefficients, stats: &SignalStats) -> Result<ErrorRateBound> {
    if !(stats.snr > 0.0) {
        return Err(Error::domain(format!(
            "snr = {} must be positive",
            stats.snr
        )));
    }
    if !(stats.mar > 0.0 && stats.mar <= 1.0 + 1e-12) {
        return Err(Error::validation(format!(
            "MAR = {} must lie in (0, 1]",
            stats.mar
        )));
    }
    let headline = if stats.snr.is_infinite() {
        0.0
    } else {
        coeffs.c1 / (stats.snr * stats.mar)
    };
    let full = headline + coeffs.c2 / stats.mar - coeffs.c3;
    Ok(ErrorRateBound { headline, full })
}

/// Which statement supplies the required SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundRule {
    /// General form `C1(params) / (rho0 MAR)`.
    Theorem1 { theta1: f64, theta2: f64, tau: f64 },
    /// `snr >= mar_ratio^2 delta^(-3/2)`, giving `rho_error <= delta^(1/2) / (1 - delta)^2`.
    Corollary1,
    /// Equal magnitudes: `C1 = 1 / (delta (1 - delta)^2)`.
    Corollary2,
    /// Equal magnitudes: `C1 = 4 / (1 - delta)`.
    Corollary3,
}

impl BoundRule {
    /// Theorem 1 with `theta1 = 1/2, theta2 = inf, tau = 1`.
    pub const THEOREM1_DEFAULT: BoundRule = BoundRule::Theorem1 {
        theta1: 0.5,
        theta2: f64::INFINITY,
        tau: 1.0,
    };

    pub fn name(&self) -> &'static str {
        match self {
            BoundRule::Theorem1 { .. } => "theorem1",
            BoundRule::Corollary1 => "corollary1",
            BoundRule::Corollary2 => "corollary2",
            BoundRule::Corollary3 => "corollary3",
        }
    }

    /// The parameter choice each rule fixes, at a given `delta`.
    pub fn params(&self, delta: f64) -> BoundParams {
        match *self {
            BoundRule::Theorem1 {
                theta1,
                theta2,
                tau,
            } => BoundParams {
                delta,
                theta1,
                theta2,
                tau,
            },
            BoundRule::Corollary1 | BoundRule::Corollary2 => BoundParams::with_theta1_delta(delta),
            BoundRule::Corollary3 => BoundParams::with_theta1_half(delta),
        }
    }

    pub fn coefficients(&self, delta: f64) -> Result<Coefficients> {
        coefficients(&self.params(delta))
    }
}

impl FromStr for BoundRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(Self::THEOREM1_DEFAULT),
            "corollary1" => Ok(BoundRule::Corollary1),
            "corollary2" => Ok(BoundRule::Corollary2),
            "corollary3" => Ok(BoundRule::Corollary3),
            other => Err(Error::validation(format!(
                "unknown rule {other:?}; expected theorem1, corollary1, corollary2 or corollary3"
            ))),
        }
    }
}

// JSON form: "corollary3", or {"theorem1": {"theta1": .., "theta2": null, "tau": ..}}
// where a null or missing theta2 means infinity.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RuleRepr {
    Theorem1 {
        theta1: f64,
        #[serde(default)]
        theta2: Option<f64>,
        tau: f64,
    },
    Corollary1,
    Corollary2,
    Corollary3,
}

impl Serialize for BoundRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            BoundRule::Theorem1 {
                theta1,
                theta2,
                tau,
            } => RuleRepr::Theorem1 {
                theta1,
                theta2: theta2.is_finite().then_some(theta2),
                tau,
            },
            BoundRule::Corollary1 => RuleRepr::Corollary1,
            BoundRule::Corollary2 => RuleRepr::Corollary2,
            BoundRule::Corollary3 => RuleRepr::Corollary3,
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match RuleRepr::deserialize(deserializer)? {
            RuleRepr::Theorem1 {
                theta1,
                theta2,
                tau,
            } => BoundRule::Theorem1 {
                theta1,
                theta2: theta2.unwrap_or(f64::INFINITY),
                tau,
            },
            RuleRepr::Corollary1 => BoundRule::Corollary1,
            RuleRepr::Corollary2 => BoundRule::Corollary2,
            RuleRepr::Corollary3 => BoundRule::Corollary3,
        })
    }
}

/// A required SNR and the error rate it guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Requirement {
    pub snr: f64,
    pub error_bound: f64,
}

/// SNR needed for `rule` to guarantee its error bound. `mar` is the
/// minimum-to-average ratio in `(0, 1]`; corollaries 2 and 3 assume `MAR = 1`
/// and ignore it. Corollary 1 fixes its own error bound and ignores `rho0`
/// beyond validating it.
pub fn required_snr(rule: BoundRule, delta: f64, rho0: f64, mar: f64) -> Result<Requirement> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::domain(format!("rho0 = {rho0} must lie in (0, 1)")));
    }
    if !(mar > 0.0 && mar <= 1.0) {
        return Err(Error::domain(format!("MAR = {mar} must lie in (0, 1]")));
    }
    let req = match rule {
        BoundRule::Theorem1 { .. } => {
            let c = rule.coefficients(delta)?;
            Requirement {
                snr: c.c1 / (rho0 * mar),
                error_bound: rho0,
            }
        }
        BoundRule::Corollary1 => Requirement {
            snr: delta.powf(-1.5) / mar,
            error_bound: delta.sqrt() / (1.0 - delta).powi(2),
        },
        BoundRule::Corollary2 => Requirement {
            snr: 1.0 / (delta * (1.0 - delta).powi(2) * rho0),
            error_bound: rho0,
        },
        BoundRule::Corollary3 => Requirement {
            snr: 4.0 / ((1.0 - delta) * rho0),
            error_bound: rho0,
        },
    };
    Ok(req)
}

/// `steps` evenly spaced points from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(min < max) {
        return Err(Error::validation(format!(
            "grid needs min < max and at least 2 steps, got [{min}, {max}] with {steps}"
        )));
    }
    let h = (max - min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                max
            } else {
                min + h * i as f64
            }
        })
        .collect())
}

/// Required SNR at each `delta` in the grid.
pub fn snr_delta_curve(
    rule: BoundRule,
    rho0: f64,
    mar: f64,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::validation("empty delta grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("delta grid must be strictly increasing"));
    }
    grid.iter()
        .map(|&d| required_snr(rule, d, rho0, mar).map(|r| (d, r.snr)))
        .collect()
}

/// Curve CSV: header `delta,required_snr`, 17 significant digits per value.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("delta,required_snr\n");
    for (d, s) in points {
        let _ = writeln!(out, "{},{}", fmt::full(*d), fmt::full(*s));
    }
    out
}

/// `(1/(1-delta)^2, 11/(1 - 2 sqrt(delta)))`: the leading constant here against
/// the earlier `C = 11/(1 - 2 sqrt(delta))`. The second is only positive for
/// `delta < 1/4`.
pub fn wang2015_comparison(delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("delta = {delta} must be positive")));
    }
    if delta >= 0.25 {
        return Err(Error::domain(format!(
            "delta = {delta} >= 0.25 makes 1 - 2 sqrt(delta) nonpositive, so the earlier constant is undefined"
        )));
    }
    Ok((
        1.0 / (1.0 - delta).powi(2),
        11.0 / (1.0 - 2.0 * delta.sqrt()),
    ))
}

/// Root of `sqrt(delta) = (1 - delta)^2` on (0, 1): below it the corollary-1
/// error bound `sqrt(delta)/(1-delta)^2` is less than one.
pub fn corollary1_crossing(tol: f64) -> f64 {
    let f = |d: f64| d.sqrt() - (1.0 - d).powi(2);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
