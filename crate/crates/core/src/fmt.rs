//! Decimal formatting with a fixed number of significant digits.

/// Fixed-point decimal rendering of `x` with `digits` significant digits.
/// Non-finite values render as `inf`, `-inf`, `NaN`.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// 12 significant digits with trailing zeros trimmed; the text-mode number format.
pub fn text(x: f64) -> String {
    let s = sig(x, 12);
    if s.contains('.') && x.is_finite() {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// 17 significant digits: enough for any `f64` to round-trip.
pub fn full(x: f64) -> String {
    sig(x, 17)
}
