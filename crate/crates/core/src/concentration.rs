//! Anytime-valid confidence radii and elliptical-potential utilities.
//!
//! The radii are the stitched law-of-iterated-logarithm boundaries used by
//! the elimination tests, with every iterated logarithm guarded by
//! [`ln_ln_plus`] so that small counts have defined (and larger) values.
//!
//! [`GramAccumulator`] maintains `V_t = V_0 + Σ x xᵀ` together with its
//! inverse and log-determinant under rank-one updates. Both the OFUL learner
//! and the elliptical-potential checks are built on it.

use nalgebra::DMatrix;

use crate::error::{param, Result};
use crate::math::{ln_ln_plus, ln_plus, TOLERANCE};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

/// Per-learner one-sided deviation radius for reward sums after `n` plays
/// among `learners` learners:
/// `max(3, 0.85 · sqrt(n · (ln_+ ln_+(n/2) + 0.72 · ln(10.4 · M / δ))))`.
///
/// The radius is in units of a reward stream whose increments lie in an
/// interval of width one.
pub fn hoeffding_radius(n: u64, learners: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return param("hoeffding radius needs n >= 1");
    }
    if learners == 0 {
        return param("hoeffding radius needs at least one learner");
    }
    let nf = n as f64;
    let inner = ln_ln_plus(nf / 2.0) + 0.72 * (10.4 * learners as f64 / delta).ln();
    Ok((0.85 * (nf * inner).sqrt()).max(3.0))
}

/// Deviation radius for the sum of `t` rewards in one epoch of the
/// adversarial master: `0.85 · sqrt(t · (ln_+ ln_+(4t) + 0.72 · ln(10.4 / δ)))`.
pub fn epoch_radius(t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let tf = t as f64;
    let inner = ln_ln_plus(4.0 * tf) + 0.72 * (10.4 / delta).ln();
    Ok(0.85 * (tf * inner).sqrt())
}

/// Constants of the polynomially stitched boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchedConfig {
    /// Stitching rate.
    pub eta: f64,
    /// Stitching exponent.
    pub s: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for StitchedConfig {
    fn default() -> Self {
        Self {
            eta: 2.0,
            s: 1.4,
            a0: 1.44,
            a1: 0.41,
            a2: 5.2,
        }
    }
}

impl StitchedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0) {
            return param(format!("stitching rate must exceed 1, got {}", self.eta));
        }
        if !(self.s > 0.0 && self.a0 > 0.0 && self.a1 > 0.0 && self.a2 > 0.0) {
            return param("stitching constants must be positive");
        }
        Ok(())
    }

    /// Uniform empirical-Bernstein bound on a sub-ψ_P process with variance
    /// process value `variance`, scale `c` and floor `floor`:
    ///
    /// `a0 · sqrt((V ∨ m) · ℓ) + a1 · c · ℓ` with
    /// `ℓ = s · ln_+ ln_+(η (V/m ∨ 1)) + ln(a2 / δ)`.
    ///
    /// `delta` may be any value in `(0, a2)`, the range on which the log term
    /// is positive.
    pub fn empirical_bernstein_bound(
        &self,
        variance: f64,
        c: f64,
        delta: f64,
        floor: f64,
    ) -> Result<f64> {
        self.validate()?;
        if !(floor > 0.0) {
            return param(format!("floor must be positive, got {floor}"));
        }
        if !(c > 0.0) {
            return param(format!("scale must be positive, got {c}"));
        }
        if !(variance >= 0.0) {
            return param(format!("variance must be non-negative, got {variance}"));
        }
        if !(delta > 0.0 && delta < self.a2) {
            return param(format!("delta must lie in (0, {}), got {delta}", self.a2));
        }
        let ratio = (variance / floor).max(1.0);
        let ell = self.s * ln_ln_plus(self.eta * ratio) + (self.a2 / delta).ln();
        Ok(self.a0 * (variance.max(floor) * ell).sqrt() + self.a1 * c * ell)
    }
}

/// [`StitchedConfig::empirical_bernstein_bound`] with the default constants.
pub fn empirical_bernstein_bound(variance: f64, c: f64, delta: f64, floor: f64) -> Result<f64> {
    StitchedConfig::default().empirical_bernstein_bound(variance, c, delta, floor)
}

/// High-probability bound on
/// `Σ_t min(b, ‖x_t‖²_{V_{t-1}^{-1}})` when each `x_t` enters `V` only with
/// probability `p`:
/// `max(1, (4/p)(1+b) · ln(ln_+(2bn ∨ 2) · 5.2 · det V_n / det V_0 / δ))`.
pub fn randomized_elliptical_bound(
    n: u64,
    b: f64,
    p: f64,
    delta: f64,
    det_ratio: f64,
) -> Result<f64> {
    check_delta(delta)?;
    if !(p > 0.0 && p <= 1.0) {
        return param(format!("p must lie in (0, 1], got {p}"));
    }
    if !(b > 0.0) {
        return param(format!("cap must be positive, got {b}"));
    }
    if !(det_ratio >= 1.0 - TOLERANCE) {
        return param(format!("determinant ratio must be at least 1, got {det_ratio}"));
    }
    let arg = ln_plus((2.0 * b * n as f64).max(2.0)) * 5.2 * det_ratio / delta;
    Ok((4.0 / p * (1.0 + b) * arg.ln()).max(1.0))
}

/// Upper bound on how often a learner sampled with probability `p` is picked
/// in the first `t` rounds: `max(3tp, 8.12 · ln(5.2 · M · ln_+(2t) / δ))`.
pub fn playcount_upper_bound(t: u64, p: f64, learners: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if t == 0 {
        return param("playcount bound needs t >= 1");
    }
    if !(p > 0.0 && p <= 1.0) {
        return param(format!("p must lie in (0, 1], got {p}"));
    }
    if learners == 0 {
        return param("playcount bound needs at least one learner");
    }
    let tf = t as f64;
    let log_branch = 8.12 * (5.2 * learners as f64 * ln_plus(2.0 * tf) / delta).ln();
    Ok((3.0 * tf * p).max(log_branch))
}

/// `V_t = V_0 + Σ x xᵀ`, its inverse and `ln det V_t`, under rank-one updates.
///
/// The inverse is updated with Sherman–Morrison and re-factorized from `V`
/// every `refactor_every` updates to bound drift.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    gram: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
    log_det0: f64,
    updates: u64,
    refactor_every: u64,
    scratch: Vec<f64>,
}

impl GramAccumulator {
    pub const DEFAULT_REFACTOR: u64 = 512;

    /// Starts from `V_0 = λ I`.
    pub fn ridge(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return param(format!("regularization must be positive, got {lambda}"));
        }
        if dim == 0 {
            return param("dimension must be at least 1");
        }
        Self::from_matrix(DMatrix::from_diagonal_element(dim, dim, lambda))
    }

    /// Starts from an arbitrary symmetric positive-definite `V_0`.
    pub fn from_matrix(v0: DMatrix<f64>) -> Result<Self> {
        if !v0.is_square() || v0.nrows() == 0 {
            return param("initial matrix must be square and non-empty");
        }
        let asym = (&v0 - v0.transpose()).amax();
        if asym > 1e-10 * v0.amax().max(1.0) {
            return param("initial matrix must be symmetric");
        }
        let chol = v0
            .clone()
            .cholesky()
            .ok_or_else(|| crate::error::Error::Parameter("initial matrix is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let inverse = chol.inverse();
        let dim = v0.nrows();
        Ok(Self {
            gram: v0,
            inverse,
            log_det,
            log_det0: log_det,
            updates: 0,
            refactor_every: Self::DEFAULT_REFACTOR,
            scratch: vec![0.0; dim],
        })
    }

    pub fn with_refactor_every(mut self, every: u64) -> Self {
        self.refactor_every = every.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `‖x‖²_{V^{-1}}`.
    pub fn inv_quad(&self, x: &[f64]) -> f64 {
        quad_form(&self.inverse, x)
    }

    /// `V^{-1} y`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        mat_vec(&self.inverse, y, &mut out);
        out
    }

    /// Adds `x xᵀ`. Returns `‖x‖²_{V^{-1}}` evaluated before the update.
    pub fn update(&mut self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut u = std::mem::take(&mut self.scratch);
        mat_vec(&self.inverse, x, &mut u);
        let q: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        let denom = 1.0 + q;
        for j in 0..d {
            let uj = u[j] / denom;
            let col = self.inverse.column_mut(j);
            for (i, v) in col.into_iter().enumerate() {
                *v -= u[i] * uj;
            }
        }
        for j in 0..d {
            for i in 0..d {
                self.gram[(i, j)] += x[i] * x[j];
            }
        }
        self.log_det += denom.ln();
        self.scratch = u;
        self.updates += 1;
        if self.updates.is_multiple_of(self.refactor_every) {
            self.refactor();
        }
        q
    }

    /// Recomputes the inverse and log-determinant from `V` by Cholesky.
    pub fn refactor(&mut self) {
        if let Some(chol) = self.gram.clone().cholesky() {
            self.log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            self.inverse = chol.inverse();
        }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `ln det V_t`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `ln(det V_t / det V_0)`.
    pub fn log_det_ratio(&self) -> f64 {
        (self.log_det - self.log_det0).max(0.0)
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}

/// `xᵀ M x` for a column-major square matrix.
pub(crate) fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = m.nrows();
    let data = m.as_slice();
    let mut acc = 0.0;
    for (j, col) in data.chunks_exact(d).enumerate() {
        let s: f64 = col.iter().zip(x).map(|(a, b)| a * b).sum();
        acc += s * x[j];
    }
    acc
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let d = m.nrows();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, col) in m.as_slice().chunks_exact(d).enumerate() {
        let xj = x[j];
        for (o, a) in out.iter_mut().zip(col) {
            *o += a * xj;
        }
    }
}

/// Outcome of [`elliptical_potential_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticalCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the deterministic elliptical potential inequality
/// `Σ_t min(b, ‖x_t‖²_{V_{t-1}^{-1}}) <= (1 + b) · ln(det V_n / det V_0)`.
pub fn elliptical_potential_check(
    xs: &[Vec<f64>],
    v0: &DMatrix<f64>,
    b: f64,
) -> Result<EllipticalCheck> {
    if !(b > 0.0) {
        return param(format!("cap must be positive, got {b}"));
    }
    let mut acc = GramAccumulator::from_matrix(v0.clone())?;
    let mut lhs = 0.0;
    for x in xs {
        if x.len() != acc.dim() {
            return param(format!(
                "vector of length {} does not match dimension {}",
                x.len(),
                acc.dim()
            ));
        }
        lhs += acc.update(x).min(b);
    }
    acc.refactor();
    let rhs = (1.0 + b) * acc.log_det_ratio();
    Ok(EllipticalCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9 * rhs.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hoeffding_floor_and_closed_form() {
        assert_eq!(hoeffding_radius(1, 1, 0.1).unwrap(), 3.0);
        assert_eq!(hoeffding_radius(1, 50, 0.1).unwrap(), 3.0);
        // n=100, M=1, δ=0.05: ln_+ ln_+(50) = ln ln 50 = 1.3641..., and
        // 0.72 ln(208) = 3.8441...; mpmath gives 19.3961768947...
        let r = hoeffding_radius(100, 1, 0.05).unwrap();
        let inner = (50f64).ln().ln() + 0.72 * (208f64).ln();
        assert!((r - 0.85 * (100.0 * inner).sqrt()).abs() < 1e-12);
        assert!((r - 19.396_176_895).abs() < 1e-6, "{r}");
        assert!(hoeffding_radius(10, 1, 1.0).is_err());
        assert!(hoeffding_radius(10, 1, 0.0).is_err());
    }

    #[test]
    fn hoeffding_monotone_in_m_and_delta() {
        for n in [1, 5, 50, 500, 5000] {
            let a = hoeffding_radius(n, 2, 0.05).unwrap();
            let b = hoeffding_radius(n, 8, 0.05).unwrap();
            let c = hoeffding_radius(n, 2, 0.01).unwrap();
            assert!(b >= a && c >= a);
        }
    }

    #[test]
    fn bernstein_guarded_example() {
        let delta = 5.2 / std::f64::consts::E;
        let v = empirical_bernstein_bound(0.0, 1.0, delta, 1.0).unwrap();
        let want = 1.44 * 2.4f64.sqrt() + 0.41 * 2.4;
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        assert!(empirical_bernstein_bound(1.0, 1.0, 0.1, 0.0).is_err());
        // V = m sits at the symmetry point of V/m ∨ 1.
        let at = empirical_bernstein_bound(2.0, 1.0, 0.1, 2.0).unwrap();
        let below = empirical_bernstein_bound(1.0, 1.0, 0.1, 2.0).unwrap();
        assert_eq!(at, below);
    }

    #[test]
    fn bernstein_monotone() {
        let mut prev = 0.0;
        for k in 0..200 {
            let v = empirical_bernstein_bound(k as f64 * 0.37, 1.0, 0.05, 1.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let a = empirical_bernstein_bound(3.0, 1.0, 0.05, 1.0).unwrap();
        let b = empirical_bernstein_bound(3.0, 2.0, 0.05, 1.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn elliptical_single_step_and_empty() {
        let v0 = DMatrix::identity(2, 2);
        let c = elliptical_potential_check(&[vec![1.0, 0.0]], &v0, 1.0).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12);
        assert!((c.rhs - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(c.holds);
        let e = elliptical_potential_check(&[], &v0, 1.0).unwrap();
        assert_eq!((e.lhs, e.rhs, e.holds), (0.0, 0.0, true));
    }

    #[test]
    fn elliptical_rejects_indefinite() {
        let v0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(elliptical_potential_check(&[], &v0, 1.0).is_err());
    }

    #[test]
    fn elliptical_random_unit_stream_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
                let n = crate::math::norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let c = elliptical_potential_check(&xs, &DMatrix::identity(5, 5), 1.0).unwrap();
        assert!(c.holds, "{c:?}");
    }

    #[test]
    fn randomized_bound_scales_with_inverse_p() {
        let a = randomized_elliptical_bound(1000, 1.0, 1.0, 0.05, 10.0).unwrap();
        let b = randomized_elliptical_bound(1000, 1.0, 0.25, 0.05, 10.0).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(randomized_elliptical_bound(10, 1.0, 0.0, 0.05, 1.0).is_err());
    }

    #[test]
    fn randomized_bound_dominates_deterministic_rhs_at_full_information() {
        let mut acc = GramAccumulator::ridge(3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            acc.update(&x);
        }
        let ratio = acc.log_det_ratio().exp();
        let det_rhs = 2.0 * acc.log_det_ratio();
        let rnd = randomized_elliptical_bound(300, 1.0, 1.0, 0.05, ratio).unwrap();
        assert!(rnd >= det_rhs);
    }

    #[test]
    fn playcount_branches() {
        let big = playcount_upper_bound(1_000_000, 0.25, 4, 0.05).unwrap();
        assert_eq!(big, 750_000.0);
        let small = playcount_upper_bound(1, 0.25, 4, 0.05).unwrap();
        let log_branch = 8.12 * (5.2 * 4.0 * 1.0 / 0.05f64).ln();
        assert!((small - log_branch).abs() < 1e-12);
    }

    #[test]
    fn accumulator_matches_direct_inverse() {
        let mut acc = GramAccumulator::ridge(4, 0.5).unwrap().with_refactor_every(1 << 40);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            acc.update(&x);
        }
        let direct = acc.gram().clone().try_inverse().unwrap();
        let err = (&direct - acc.inverse()).amax() / direct.amax();
        assert!(err < 1e-8, "{err}");
        let chol = acc.gram().clone().cholesky().unwrap();
        let ld = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        assert!((ld - acc.log_det()).abs() < 1e-8);
    }
}
