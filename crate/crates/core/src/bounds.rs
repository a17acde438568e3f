//! Candidate (presumed) regret bounds.
//!
//! Every base learner is paired with a function `R(n)` of its own play count
//! that it claims upper-bounds its pseudo-regret. The master only ever reads
//! `R(n)`; whether the claim holds is exactly what the elimination test
//! probes. All families here satisfy `R(0) = 0` and
//! `0 <= R(n) - R(n - 1) <= 1`, which the `∧ n` cap enforces.

use crate::error::{param, Error, Result};
use crate::math::ln_plus;

/// A presumed regret bound from one of the supported parametric families.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateBound {
    /// `min(scale · constant · n^exponent, n)`.
    PolyCapped {
        scale: f64,
        constant: f64,
        exponent: f64,
    },
    /// `min(scale · constant · sqrt(n · ln_+(n / delta)), n)`.
    SqrtLog {
        scale: f64,
        constant: f64,
        delta: f64,
    },
    /// `min(c1 · sqrt(n) + eps · c2 · n, n)`.
    EpsLinear { c1: f64, c2: f64, eps: f64 },
    /// A running sum reported by the learner itself.
    DataDependent(RunningBound),
}

/// Running data-dependent bound with a per-play cap on each increment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningBound {
    cap: f64,
    total: f64,
    plays: u64,
}

impl RunningBound {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return param(format!("running bound cap must be positive, got {cap}"));
        }
        Ok(Self {
            cap,
            total: 0.0,
            plays: 0,
        })
    }

    /// Adds one play's contribution, clamped to `[0, cap]`.
    pub fn push(&mut self, increment: f64) {
        let inc = if increment.is_nan() {
            self.cap
        } else {
            increment.clamp(0.0, self.cap)
        };
        self.total += inc;
        self.plays += 1;
    }

    /// Replaces the running value with one reported by a learner. The
    /// increment since the last report is still capped per play.
    pub fn sync(&mut self, reported_total: f64, plays: u64) {
        let new_plays = plays.saturating_sub(self.plays);
        let max_total = self.total + self.cap * new_plays as f64;
        self.total = reported_total.clamp(self.total, max_total);
        self.plays = plays;
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn plays(&self) -> u64 {
        self.plays
    }
}

impl CandidateBound {
    pub fn poly(scale: f64, constant: f64, exponent: f64) -> Result<Self> {
        let b = Self::PolyCapped {
            scale,
            constant,
            exponent,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn sqrt_log(scale: f64, constant: f64, delta: f64) -> Result<Self> {
        let b = Self::SqrtLog {
            scale,
            constant,
            delta,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn eps_linear(c1: f64, c2: f64, eps: f64) -> Result<Self> {
        let b = Self::EpsLinear { c1, c2, eps };
        b.validate()?;
        Ok(b)
    }

    pub fn data_dependent(cap: f64) -> Result<Self> {
        Ok(Self::DataDependent(RunningBound::new(cap)?))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::PolyCapped {
                scale,
                constant,
                exponent,
            } => {
                check_scale(scale, constant)?;
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return param(format!("exponent must lie in (0, 1], got {exponent}"));
                }
            }
            Self::SqrtLog {
                scale,
                constant,
                delta,
            } => {
                check_scale(scale, constant)?;
                if !(delta > 0.0 && delta < 1.0) {
                    return param(format!("delta must lie in (0, 1), got {delta}"));
                }
            }
            Self::EpsLinear { c1, c2, eps } => {
                if !(c1 > 1.0 && c2 > 1.0 && c1.is_finite() && c2.is_finite()) {
                    return param(format!("constants must exceed 1, got c1={c1}, c2={c2}"));
                }
                if !(eps > 0.0 && eps <= 1.0) {
                    return param(format!("eps must lie in (0, 1], got {eps}"));
                }
            }
            Self::DataDependent(ref running) => {
                if !(running.cap > 0.0) {
                    return param("running bound cap must be positive");
                }
            }
        }
        Ok(())
    }

    /// Evaluates `R(n)`.
    ///
    /// A data-dependent bound is only observable at the learner's current
    /// play count; asking for any other `n` is an error.
    pub fn evaluate(&self, n: u64) -> Result<f64> {
        self.validate()?;
        if n == 0 {
            return Ok(0.0);
        }
        let nf = n as f64;
        let raw = match *self {
            Self::PolyCapped {
                scale,
                constant,
                exponent,
            } => scale * constant * nf.powf(exponent),
            Self::SqrtLog {
                scale,
                constant,
                delta,
            } => scale * constant * (nf * ln_plus(nf / delta)).sqrt(),
            Self::EpsLinear { c1, c2, eps } => c1 * nf.sqrt() + eps * c2 * nf,
            Self::DataDependent(ref running) => {
                if running.plays != n {
                    return Err(Error::Parameter(format!(
                        "data-dependent bound is observable only at n={}, asked for n={n}",
                        running.plays
                    )));
                }
                return Ok(running.total);
            }
        };
        Ok(raw.min(nf))
    }

    /// Scale of the bound used for play-ratio reasoning, if it has one.
    pub fn poly_parts(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Self::PolyCapped {
                scale,
                constant,
                exponent,
            } => Some((scale, constant, exponent)),
            _ => None,
        }
    }

    /// True iff `0 <= R(n) - R(n-1) <= 1` for every `1 <= n <= n_max`.
    pub fn increments_valid(&self, n_max: u64) -> bool {
        if self.validate().is_err() {
            return false;
        }
        if let Self::DataDependent(running) = self {
            // Only the running value is observable; per-play capping is what
            // keeps it unit-Lipschitz.
            return running.cap <= 1.0 + crate::math::TOLERANCE;
        }
        increments_valid_by(|n| self.evaluate(n).unwrap_or(f64::NAN), n_max)
    }
}

fn check_scale(scale: f64, constant: f64) -> Result<()> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return param(format!("scale must be at least 1, got {scale}"));
    }
    if !(constant >= 1.0 && constant.is_finite()) {
        return param(format!("constant must be at least 1, got {constant}"));
    }
    Ok(())
}

/// Scans `f(0), ..., f(n_max)` for the unit-Lipschitz, monotone, `f(0) = 0`
/// conditions. Works on any candidate bound, including ones outside the
/// supported families.
pub fn increments_valid_by(f: impl Fn(u64) -> f64, n_max: u64) -> bool {
    let tol = crate::math::TOLERANCE;
    let mut prev = f(0);
    if prev.abs() > tol {
        return false;
    }
    for n in 1..=n_max {
        let cur = f(n);
        let inc = cur - prev;
        if !(inc >= -tol && inc <= 1.0 + tol) {
            return false;
        }
        prev = cur;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn poly_examples() {
        let b = CandidateBound::poly(2.0, 1.0, 0.5).unwrap();
        assert_eq!(b.evaluate(9).unwrap(), 6.0);
        assert_eq!(b.evaluate(1).unwrap(), 1.0);
        assert_eq!(b.evaluate(0).unwrap(), 0.0);
    }

    #[test]
    fn eps_linear_cap() {
        let b = CandidateBound::eps_linear(10.0, 10.0, 0.1).unwrap();
        assert_eq!(b.evaluate(100).unwrap(), 100.0);
    }

    #[test]
    fn sqrt_log_closed_form() {
        // sqrt(100 * ln 1000) = 26.2826..., computed with mpmath at 30 digits:
        // 26.2826088487847...
        let b = CandidateBound::sqrt_log(1.0, 1.0, 0.1).unwrap();
        let v = b.evaluate(100).unwrap();
        assert!((v - 26.282_608_848_784_7).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CandidateBound::poly(0.5, 1.0, 0.5).is_err());
        assert!(CandidateBound::poly(1.0, 1.0, 1.5).is_err());
        assert!(CandidateBound::poly(1.0, 1.0, 0.0).is_err());
        assert!(CandidateBound::eps_linear(2.0, 2.0, 0.0).is_err());
        assert!(CandidateBound::eps_linear(1.0, 2.0, 0.5).is_err());
        assert!(CandidateBound::sqrt_log(1.0, 1.0, 1.0).is_err());
        assert!(CandidateBound::data_dependent(0.0).is_err());
    }

    #[test]
    fn increment_examples() {
        assert!(CandidateBound::poly(5.0, 1.0, 0.5)
            .unwrap()
            .increments_valid(10_000));
        assert!(!increments_valid_by(|n| 2.0 * n as f64, 10));
        assert!(CandidateBound::eps_linear(2.0, 2.0, 1.0)
            .unwrap()
            .increments_valid(100));
    }

    #[test]
    fn data_dependent_is_observable_only_at_current_count() {
        let mut b = RunningBound::new(1.0).unwrap();
        b.push(0.4);
        b.push(3.0);
        b.push(-1.0);
        assert_eq!(b.total(), 1.4);
        let bound = CandidateBound::DataDependent(b);
        assert_eq!(bound.evaluate(3).unwrap(), 1.4);
        assert!(bound.evaluate(2).is_err());
        assert!(bound.increments_valid(100));
    }

    #[test]
    fn sync_caps_reported_growth() {
        let mut b = RunningBound::new(2.0).unwrap();
        b.sync(10.0, 2);
        assert_eq!(b.total(), 4.0);
        b.sync(3.0, 3);
        assert_eq!(b.total(), 4.0);
    }

    fn any_bound() -> impl Strategy<Value = CandidateBound> {
        prop_oneof![
            (1.0..50.0f64, 1.0..50.0f64, 0.05..=1.0f64)
                .prop_map(|(d, c, b)| CandidateBound::poly(d, c, b).unwrap()),
            (1.0..20.0f64, 1.0..20.0f64, 0.001..0.999f64)
                .prop_map(|(d, c, del)| CandidateBound::sqrt_log(d, c, del).unwrap()),
            (1.001..30.0f64, 1.001..30.0f64, 0.001..=1.0f64)
                .prop_map(|(a, b, e)| CandidateBound::eps_linear(a, b, e).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn every_family_is_monotone_and_unit_lipschitz(b in any_bound()) {
            prop_assert!(b.increments_valid(3_000));
        }
    }
}
