//! Small numeric helpers shared across modules.

use std::f64::consts::E;

/// Absolute tolerance used for comparisons of reward-like quantities.
pub const TOLERANCE: f64 = 1e-9;

/// `ln(max(x, e))`, so the result is always at least one.
#[inline]
pub fn ln_plus(x: f64) -> f64 {
    if x.is_nan() {
        return 1.0;
    }
    x.max(E).ln()
}

/// `ln_+(ln_+(x))`, the guarded iterated logarithm. Always non-negative.
#[inline]
pub fn ln_ln_plus(x: f64) -> f64 {
    ln_plus(ln_plus(x))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
