//! Percent-error arithmetic used by the accuracy reports.

use crate::scalar::Scalar;

/// Decimal places used for reported volumes, rates and percentages.
pub const REPORT_DECIMALS: i32 = 2;

/// `|measured − prescribed| / prescribed · 100`.
pub fn percent_error<S: Scalar>(measured: S, prescribed: S) -> S {
    (measured - prescribed).abs() / prescribed * S::lit(100.0)
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to<S: Scalar>(x: S, decimals: i32) -> S {
    let scale = S::lit(10f64.powi(decimals));
    (x * scale).round() / scale
}

/// Error percentage as reported: the measurement is first rounded to report
/// precision, then the percentage is computed and rounded again.
pub fn reported_percent_error<S: Scalar>(measured: S, prescribed: S) -> S {
    let shown = round_to(measured, REPORT_DECIMALS);
    round_to(percent_error(shown, prescribed), REPORT_DECIMALS)
}

pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let sum = values.iter().fold(S::zero(), |acc, &v| acc + v);
    sum / S::from_usize(values.len()).unwrap_or_else(S::one)
}
