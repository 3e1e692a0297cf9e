//! Browser bindings: required-SNR curves, single OMP trials, and the
//! feasibility report. The `*_impl` functions hold the logic and are tested
//! natively; the exported wrappers only convert errors to JS strings.

use ompb::bounds::{error_rate, error_rate_bound, linear_grid, signal_stats, snr_delta_curve, BoundRule};
use ompb::experiments::{gen_matrix, gen_signal, inject_noise, Ensemble, SignalProfile};
use ompb::fmt::text;
use ompb::infotheory::{feasibility_rho_max, necessary_snr, sufficient_region, RecoveryRegime};
use ompb::omp::{omp_run, Problem};
use wasm_bindgen::prelude::*;

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Flattened `[delta0, snr0, delta1, snr1, ...]`.
pub fn snr_curve_impl(rule: &str, rho0: f64, mar: f64, delta_min: f64, delta_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    let rule: BoundRule = rule.parse().map_err(|e: ompb::Error| e.to_string())?;
    let grid = linear_grid(delta_min, delta_max, steps).map_err(|e| e.to_string())?;
    let pts = snr_delta_curve(rule, rho0, mar, &grid).map_err(|e| e.to_string())?;
    Ok(pts.into_iter().flat_map(|(d, s)| [d, s]).collect())
}

#[wasm_bindgen]
pub fn snr_curve(rule: &str, rho0: f64, mar: f64, delta_min: f64, delta_max: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    snr_curve_impl(rule, rho0, mar, delta_min, delta_max, steps).map_err(js)
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct TrialView {
    signal: Vec<f64>,
    estimate: Vec<f64>,
    true_support: Vec<u32>,
    found_support: Vec<u32>,
    rho_error: f64,
    snr_realized: f64,
    bound: f64,
    delta: f64,
}

#[wasm_bindgen]
impl TrialView {
    #[wasm_bindgen(getter)]
    pub fn signal(&self) -> Vec<f64> {
        self.signal.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn true_support(&self) -> Vec<u32> {
        self.true_support.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn found_support(&self) -> Vec<u32> {
        self.found_support.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho_error(&self) -> f64 {
        self.rho_error
    }

    #[wasm_bindgen(getter)]
    pub fn snr_realized(&self) -> f64 {
        self.snr_realized
    }

    /// Corollary 3 headline bound at `delta`; infinite when `delta >= 1`.
    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[wasm_bindgen(getter)]
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// One seeded trial: normalized Gaussian matrix, equal-magnitude signal,
/// noise at `snr` (non-positive or non-finite means noiseless). The bound is
/// evaluated at the assumed `delta`.
pub fn omp_trial_impl(m: usize, n: usize, k: usize, snr: f64, delta: f64, seed: u64) -> Result<TrialView, String> {
    let e = |e: ompb::Error| e.to_string();
    if !(1 <= k && k <= m && m <= n) {
        return Err(format!("need 1 <= K <= m <= n, got K = {k}, m = {m}, n = {n}"));
    }
    let phi = gen_matrix(m, n, seed, Ensemble::Gaussian, true).map_err(e)?;
    let x = gen_signal(n, k, SignalProfile::Equal, seed ^ 1).map_err(e)?;
    let snr = if snr > 0.0 && snr.is_finite() { snr } else { f64::INFINITY };
    let (y, v) = inject_noise(&phi, &x, snr, seed ^ 2).map_err(e)?;
    let out = omp_run(&Problem::new(phi.clone(), y, k).map_err(e)?).map_err(e)?;
    let truth: Vec<usize> = (0..n).filter(|&i| x[i] != 0.0).collect();
    let rho_error = error_rate(&truth, &out.support).map_err(e)?;
    let stats = signal_stats(&x, &phi, &v).map_err(e)?;
    let bound = if delta < 1.0 {
        let c = BoundRule::Corollary3.coefficients(delta).map_err(e)?;
        error_rate_bound(&c, &stats).map_err(e)?.headline
    } else {
        f64::INFINITY
    };
    let support = |v: &[usize]| v.iter().map(|&i| i as u32).collect();
    Ok(TrialView {
        true_support: support(&truth),
        found_support: support(&out.sorted_support()),
        signal: x,
        estimate: out.x_hat,
        rho_error,
        snr_realized: stats.snr,
        bound,
        delta,
    })
}

#[wasm_bindgen]
pub fn omp_trial(m: usize, n: usize, k: usize, snr: f64, delta: f64, seed: u64) -> Result<TrialView, JsValue> {
    omp_trial_impl(m, n, k, snr, delta, seed).map_err(js)
}

pub fn feasibility_impl(n: usize, m: usize, k: usize, rho0: f64, snr: f64) -> Result<String, String> {
    let e = |e: ompb::Error| e.to_string();
    let r = sufficient_region(&RecoveryRegime { n, m, k, rho0, snr }).map_err(e)?;
    let need = necessary_snr(n, m, k, rho0).map_err(e)?;
    let rho_max = feasibility_rho_max(n, m, k).map_err(e)?;
    let mut lines = vec![
        format!("snr * rho0 >= e: {}", r.condition1),
        format!("sampling-rate condition: {}", r.condition2),
        format!("snr * rho0 > {}: {}", text(r.snr_rho_threshold), r.meets_threshold),
        format!("threshold below 4: {}", r.threshold_below_four),
        format!("necessary snr {} (given {}: {})", text(need), text(snr), snr >= need),
        format!("largest rho0 matched by 4/(1-delta): {}", text(rho_max)),
    ];
    if let Some(note) = r.condition2_note {
        lines.push(note);
    }
    Ok(lines.join("\n"))
}

#[wasm_bindgen]
pub fn feasibility(n: usize, m: usize, k: usize, rho0: f64, snr: f64) -> Result<String, JsValue> {
    feasibility_impl(n, m, k, rho0, snr).map_err(js)
}
