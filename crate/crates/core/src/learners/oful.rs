use crate::bounds::RunningBound;
use crate::concentration::GramAccumulator;
use crate::env::ActionSet;
use crate::error::{param, Error, Result};
use crate::learners::{Descriptor, Learner, Proposal};
use crate::math::{dot, TOLERANCE};

/// Configuration of an [`Oful`] learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfulParams {
    /// Number of leading action coordinates used.
    pub dim: usize,
    /// Ridge regularization `λ`.
    pub lambda: f64,
    /// Assumed sub-Gaussian noise level `σ`.
    pub sigma: f64,
    /// Bound `S` on `‖θ*‖`.
    pub param_norm: f64,
    /// Bound `L` on action norms.
    pub action_norm: f64,
    /// Multiplier `κ ∈ (0, 1]` on the confidence radius.
    pub kappa: f64,
    /// Misspecification allowance `ε`. Adds `ε · √n · eps_scale` to the radius.
    pub eps: f64,
    pub eps_scale: f64,
    pub delta: f64,
    /// Reward range `R^max` used to cap optimistic and pessimistic values.
    pub reward_max: f64,
    pub refactor_every: u64,
}

impl OfulParams {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            lambda: 1.0,
            sigma: 0.1,
            param_norm: 1.0,
            action_norm: 1.0,
            kappa: 1.0,
            eps: 0.0,
            eps_scale: 1.0,
            delta: 0.05,
            reward_max: 1.0,
            refactor_every: GramAccumulator::DEFAULT_REFACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return param("OFUL dimension must be at least 1");
        }
        let positive = [
            ("lambda", self.lambda),
            ("param_norm", self.param_norm),
            ("action_norm", self.action_norm),
            ("reward_max", self.reward_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return param(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return param(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return param(format!("kappa must lie in (0, 1], got {}", self.kappa));
        }
        if !(self.eps >= 0.0 && self.eps_scale >= 0.0) {
            return param("eps and eps_scale must be non-negative");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }
}

/// Optimistic linear bandit learner on a ridge-regression confidence
/// ellipsoid, optionally restricted to the first `dim` action coordinates.
#[derive(Debug, Clone)]
pub struct Oful {
    params: OfulParams,
    gram: GramAccumulator,
    /// `Σ a r`.
    xy: Vec<f64>,
    theta: Vec<f64>,
    running: RunningBound,
    beta_max: f64,
    plays: u64,
    scratch: Vec<f64>,
}

impl Oful {
    pub fn new(params: OfulParams) -> Result<Self> {
        params.validate()?;
        let gram = GramAccumulator::ridge(params.dim, params.lambda)?
            .with_refactor_every(params.refactor_every);
        Ok(Self {
            params,
            gram,
            xy: vec![0.0; params.dim],
            theta: vec![0.0; params.dim],
            running: RunningBound::new(2.0 * params.reward_max)?,
            beta_max: 0.0,
            plays: 0,
            scratch: vec![0.0; params.dim],
        })
    }

    pub fn params(&self) -> &OfulParams {
        &self.params
    }

    /// Current estimate `θ̂`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Regularized covariance `Σ = λI + Σ a aᵀ`.
    pub fn covariance(&self) -> &nalgebra::DMatrix<f64> {
        self.gram.gram()
    }

    /// `ln det Σ`.
    pub fn log_det(&self) -> f64 {
        self.gram.log_det()
    }

    /// Confidence radius at the current state, determinant form:
    /// `κ (sqrt(2σ² ln(sqrt(det Σ / λ^d) / δ)) + sqrt(λ) S + ε sqrt(n) scale)`.
    pub fn beta(&self) -> f64 {
        let p = &self.params;
        let half_ratio = 0.5 * (self.gram.log_det() - p.dim as f64 * p.lambda.ln()).max(0.0);
        let noise = (2.0 * p.sigma * p.sigma * (half_ratio + (1.0 / p.delta).ln())).sqrt();
        p.kappa * (noise + p.lambda.sqrt() * p.param_norm + self.inflation())
    }

    /// The looser closed-form radius after `n` observations:
    /// `κ (sqrt(σ² d ln((1 + n L² / λ) / δ)) + sqrt(λ) S + ε sqrt(n) scale)`.
    pub fn beta_closed_form(&self, n: u64) -> f64 {
        let p = &self.params;
        let growth = 1.0 + n as f64 * p.action_norm * p.action_norm / p.lambda;
        let noise = (p.sigma * p.sigma * p.dim as f64 * (growth / p.delta).ln()).sqrt();
        p.kappa * (noise + p.lambda.sqrt() * p.param_norm + self.params.eps * (n as f64).sqrt() * p.eps_scale)
    }

    fn inflation(&self) -> f64 {
        self.params.eps * (self.plays as f64).sqrt() * self.params.eps_scale
    }

    /// Largest radius used in any update so far.
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    /// `‖a‖_{Σ^{-1}}` of a truncated action.
    pub fn width(&self, action: &[f64]) -> f64 {
        self.gram.inv_quad(&action[..self.params.dim]).max(0.0).sqrt()
    }

    /// True when `‖θ̂ − θ‖_Σ <= β`, comparing on the learner's coordinates.
    pub fn contains(&self, theta: &[f64]) -> bool {
        let d = self.params.dim;
        let diff: Vec<f64> = (0..d)
            .map(|i| self.theta[i] - theta.get(i).copied().unwrap_or(0.0))
            .collect();
        let q = crate::concentration::quad_form(self.gram.gram(), &diff);
        let b = self.beta();
        q <= b * b * (1.0 + 1e-12)
    }

    fn truncated<'a>(&self, action: &'a [f64]) -> Result<&'a [f64]> {
        let d = self.params.dim;
        if action.len() < d {
            return Err(Error::Input(format!(
                "action of dimension {} shorter than learner dimension {d}",
                action.len()
            )));
        }
        let a = &action[..d];
        let n = dot(a, a).sqrt();
        if n > self.params.action_norm + TOLERANCE {
            return Err(Error::Contract(format!(
                "action norm {n} exceeds bound {}",
                self.params.action_norm
            )));
        }
        Ok(a)
    }

    #[cfg(test)]
    pub(crate) fn with_state(params: OfulParams, cov: nalgebra::DMatrix<f64>, theta: Vec<f64>) -> Self {
        let mut s = Self::new(params).unwrap();
        s.gram = GramAccumulator::from_matrix(cov).unwrap();
        s.theta = theta;
        s
    }
}

impl Learner for Oful {
    fn propose(&self, actions: &ActionSet) -> Result<Proposal> {
        if actions.is_empty() {
            return Err(Error::Input("empty action set".into()));
        }
        let beta = self.beta();
        let rmax = self.params.reward_max;
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (i, full) in actions.rows().enumerate() {
            let a = self.truncated(full)?;
            let mean = dot(&self.theta, a);
            let w = self.gram.inv_quad(a).max(0.0).sqrt();
            let score = mean + beta * w;
            if best.is_none_or(|(_, s, _, _)| score > s) {
                best = Some((i, score, mean, w));
            }
        }
        let (index, score, mean, w) = best.expect("non-empty set");
        Ok(Proposal {
            index,
            optimistic: score.min(rmax),
            lower: (mean - beta * w).max(-rmax),
        })
    }

    fn observe(&mut self, action: &[f64], reward: f64) -> Result<()> {
        let a = self.truncated(action)?;
        if !reward.is_finite() {
            return Err(Error::Input(format!("reward must be finite, got {reward}")));
        }
        let beta = self.beta();
        self.beta_max = self.beta_max.max(beta);
        let q = self.gram.update(a);
        let rmax = self.params.reward_max;
        self.running.push(2.0 * (beta * q.sqrt()).min(rmax));
        for (s, x) in self.xy.iter_mut().zip(a) {
            *s += x * reward;
        }
        // θ̂ = Σ^{-1} Σ a r
        let inv = self.gram.inverse();
        let d = self.params.dim;
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        for (j, col) in inv.as_slice().chunks_exact(d).enumerate() {
            let yj = self.xy[j];
            for (o, m) in self.scratch.iter_mut().zip(col) {
                *o += m * yj;
            }
        }
        std::mem::swap(&mut self.theta, &mut self.scratch);
        self.plays += 1;
        Ok(())
    }

    fn running_bound(&self) -> Option<f64> {
        Some(self.running.total())
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            dim: self.params.dim,
            param_norm: self.params.param_norm,
            action_norm: self.params.action_norm,
            reward_max: self.params.reward_max,
        }
    }

    fn plays(&self) -> u64 {
        self.plays
    }

    fn reset(&mut self) {
        *self = Self::new(self.params).expect("parameters validated at construction");
    }
}

/// Worst-case regret of OFUL after `t` rounds given the largest radius used:
/// `2 β_max sqrt(d t (1 + L²/λ) ln((dλ + t L²) / (dλ)))`.
pub fn oful_regret_bound(beta_max: f64, dim: usize, t: u64, action_norm: f64, lambda: f64) -> f64 {
    let d = dim as f64;
    let tf = t as f64;
    let l2 = action_norm * action_norm;
    let log = ((d * lambda + tf * l2) / (d * lambda)).ln();
    2.0 * beta_max * (d * tf * (1.0 + l2 / lambda) * log).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(d: usize) -> OfulParams {
        OfulParams::new(d)
    }

    #[test]
    fn hand_solved_updates() {
        let mut o = Oful::new(params(2)).unwrap();
        assert_eq!(o.theta(), &[0.0, 0.0]);
        o.observe(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(o.covariance(), &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])));
        assert!((o.theta()[0] - 0.5).abs() < 1e-15 && o.theta()[1] == 0.0);
        o.observe(&[1.0, 0.0], 1.0).unwrap();
        assert!((o.theta()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((o.log_det() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn beta_fresh_examples() {
        let mut p = params(2);
        p.sigma = 1.0;
        p.delta = (-1f64).exp();
        let o = Oful::new(p).unwrap();
        assert!((o.beta() - (2f64.sqrt() + 1.0)).abs() < 1e-12);
        p.kappa = 0.5;
        let o = Oful::new(p).unwrap();
        assert!((o.beta() - (2f64.sqrt() + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_beta_below_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [2, 3, 5, 10] {
            let mut p = params(d);
            p.sigma = 0.5;
            let mut o = Oful::new(p).unwrap();
            for _ in 0..100 {
                let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
                let n = crate::math::norm(&v);
                let a: Vec<f64> = v.iter().map(|x| x / n).collect();
                o.observe(&a, rng.random()).unwrap();
            }
            assert!(o.beta() <= o.beta_closed_form(100), "d={d}");
        }
    }

    #[test]
    fn propose_examples() {
        let set = ActionSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut p = params(2);
        p.sigma = 0.0;
        p.param_norm = 1e-300;
        let o = Oful::with_state(p, DMatrix::identity(2, 2), vec![1.0, 0.0]);
        assert!(o.beta() < 1e-100);
        let prop = o.propose(&set).unwrap();
        assert_eq!(prop.index, 0);
        assert!((prop.optimistic - 1.0).abs() < 1e-12 && (prop.lower - 1.0).abs() < 1e-12);

        // β = 2 from the norm term alone: √λ·S with λ = 1, S = 2.
        p.param_norm = 2.0;
        p.reward_max = 10.0;
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0]));
        let o = Oful::with_state(p, cov, vec![1.0, 0.0]);
        assert!((o.beta() - 2.0).abs() < 1e-12);
        let prop = o.propose(&set).unwrap();
        assert_eq!(prop.index, 1);
        assert!((prop.optimistic - 2.0).abs() < 1e-12);
        assert!((prop.lower + 2.0).abs() < 1e-12);

        let twins = ActionSet::from_rows(&[vec![0.6, 0.0], vec![0.6, 0.0]]).unwrap();
        assert_eq!(Oful::new(params(2)).unwrap().propose(&twins).unwrap().index, 0);
        assert!(o.propose(&ActionSet::new(2, vec![]).unwrap()).is_err());
    }

    #[test]
    fn proposal_caps_at_reward_range() {
        let mut p = params(1);
        p.param_norm = 5.0;
        let o = Oful::new(p).unwrap();
        let prop = o.propose(&ActionSet::new(1, vec![1.0]).unwrap()).unwrap();
        assert_eq!((prop.optimistic, prop.lower), (1.0, -1.0));
    }

    #[test]
    fn running_bound_single_term() {
        let mut p = params(1);
        p.sigma = 0.0;
        p.param_norm = 2.0;
        p.lambda = 4.0;
        p.action_norm = 2.0;
        // β = √4 · 2 = 4, ‖a‖_{Σ^{-1}} = 1/2 → 2 · min(2, 1) = 2.
        let mut o = Oful::new(p).unwrap();
        assert_eq!(o.running_bound(), Some(0.0));
        o.observe(&[1.0], 0.0).unwrap();
        assert!((o.running_bound().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn contract_violation_on_long_action() {
        let mut o = Oful::new(params(2)).unwrap();
        assert!(matches!(o.observe(&[1.0, 1.0], 0.0), Err(Error::Contract(_))));
        assert!(o.observe(&[1.0, 0.0, 100.0], 0.0).is_ok());
    }

    #[test]
    fn truncation_ignores_high_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = Oful::new(params(2)).unwrap();
        let mut b = Oful::new(params(2)).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 0.7).collect();
            let r: f64 = rng.random();
            a.observe(&[x[0], x[1], 0.0, 0.0], r).unwrap();
            b.observe(&[x[0], x[1], rng.random(), -rng.random::<f64>()], r).unwrap();
        }
        let base: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random::<f64>() * 0.7, rng.random::<f64>() * 0.7]).collect();
        let s1 = ActionSet::from_rows(&base.iter().map(|v| vec![v[0], v[1], 0.3, 0.1]).collect::<Vec<_>>()).unwrap();
        let s2 = ActionSet::from_rows(&base.iter().map(|v| vec![v[0], v[1], -5.0, 9.0]).collect::<Vec<_>>()).unwrap();
        assert_eq!(a.propose(&s1).unwrap(), b.propose(&s2).unwrap());
    }

    #[test]
    fn regret_bound_formula() {
        let v = oful_regret_bound(1.0, 1, 1, 1.0, 1.0);
        assert!((v - 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-12);
    }
}
