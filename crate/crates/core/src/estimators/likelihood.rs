//! Censored Gaussian log-likelihood of partition-level differences and its
//! θ-derivatives.
//!
//! With `a = (l − θ)/σ`, `b = (u − θ)/σ` and `P_c = P − P_l − P_u`:
//!
//! ```text
//! ll = P_l·ln Φ(a) + P_u·ln(1 − Φ(b)) − (P_c/2)·ln σ² − s₂/(2σ²) + θ·s₁/σ² − P_c·θ²/(2σ²)
//! ```
//!
//! The additive constant is dropped. Counts are real-valued so sanitized,
//! un-rounded counts can be plugged in directly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::normal::{log_cdf, mills_lower, mills_lower_slope};

/// Statistics entering the censored likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredStats {
    pub l: f64,
    pub u: f64,
    pub s1: f64,
    pub s2: f64,
    pub p_l: f64,
    pub p_u: f64,
    pub p: f64,
}

impl CensoredStats {
    /// Effective number of uncensored partitions.
    pub fn p_c(&self) -> f64 {
        self.p - self.p_l - self.p_u
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l, self.u, self.s1, self.s2, self.p_l, self.p_u, self.p];
        if all.iter().any(|x| x.is_nan()) {
            return invalid("likelihood statistics contain NaN");
        }
        if all.iter().any(|x| !x.is_finite()) {
            return invalid("likelihood statistics must be finite");
        }
        if !(self.l < self.u) {
            return invalid(format!("likelihood needs l < u, got ({}, {})", self.l, self.u));
        }
        if self.p_l < 0.0 || self.p_u < 0.0 {
            return invalid("censored counts must be nonnegative");
        }
        if !(self.p_c() > 0.0) {
            return invalid(format!(
                "no uncensored mass left: P = {}, P_l = {}, P_u = {}",
                self.p, self.p_l, self.p_u
            ));
        }
        Ok(())
    }

    /// The same statistics for data rescaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            l: c * self.l,
            u: c * self.u,
            s1: c * self.s1,
            s2: c * c * self.s2,
            ..*self
        }
    }
}

/// A point `(θ, σ²)` of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodState {
    pub theta: f64,
    pub sigma2: f64,
}

impl LikelihoodState {
    pub fn new(theta: f64, sigma2: f64) -> Result<Self> {
        let s = Self { theta, sigma2 };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.theta.is_nan() || self.sigma2.is_nan() {
            return invalid("likelihood state contains NaN");
        }
        if !(self.sigma2 > 0.0) {
            return invalid(format!("sigma^2 must be positive, got {}", self.sigma2));
        }
        Ok(())
    }
}

fn check(state: &LikelihoodState, s: &CensoredStats) -> Result<()> {
    state.validate()?;
    s.validate()
}

/// Log-likelihood without validation, for inner loops on validated inputs.
pub(crate) fn loglik_unchecked(theta: f64, sigma2: f64, s: &CensoredStats) -> f64 {
    let sigma = sigma2.sqrt();
    let a = (s.l - theta) / sigma;
    let b = (s.u - theta) / sigma;
    let pc = s.p_c();
    let mut ll = -0.5 * pc * sigma2.ln() - (s.s2 - 2.0 * theta * s.s1 + pc * theta * theta) / (2.0 * sigma2);
    if s.p_l > 0.0 {
        ll += s.p_l * log_cdf(a);
    }
    if s.p_u > 0.0 {
        ll += s.p_u * log_cdf(-b);
    }
    ll
}

pub(crate) fn dtheta_unchecked(theta: f64, sigma2: f64, s: &CensoredStats) -> f64 {
    let sigma = sigma2.sqrt();
    let a = (s.l - theta) / sigma;
    let b = (s.u - theta) / sigma;
    let mut g = (s.s1 - s.p_c() * theta) / sigma2;
    if s.p_l > 0.0 {
        g -= s.p_l * mills_lower(a) / sigma;
    }
    if s.p_u > 0.0 {
        g += s.p_u * mills_lower(-b) / sigma;
    }
    g
}

pub(crate) fn d2theta_unchecked(theta: f64, sigma2: f64, s: &CensoredStats) -> f64 {
    let sigma = sigma2.sqrt();
    let a = (s.l - theta) / sigma;
    let b = (s.u - theta) / sigma;
    let mut h = -s.p_c() / sigma2;
    if s.p_l > 0.0 {
        // d/da [φ(a)/Φ(a)] = −r(a)·(a + r(a)), and da/dθ = −1/σ.
        h -= s.p_l * mills_lower_slope(a) / sigma2;
    }
    if s.p_u > 0.0 {
        // Hazard h(b) = φ(b)/(1 − Φ(b)) has h'(b) = h(b)·(h(b) − b).
        h -= s.p_u * mills_lower_slope(-b) / sigma2;
    }
    h
}

pub fn censored_loglik(state: &LikelihoodState, s: &CensoredStats) -> Result<f64> {
    check(state, s)?;
    Ok(loglik_unchecked(state.theta, state.sigma2, s))
}

/// `∂ll/∂θ`.
pub fn censored_loglik_dtheta(state: &LikelihoodState, s: &CensoredStats) -> Result<f64> {
    check(state, s)?;
    Ok(dtheta_unchecked(state.theta, state.sigma2, s))
}

/// `∂²ll/∂θ²`; strictly negative because the normal log-CDF is concave.
pub fn censored_loglik_d2theta(state: &LikelihoodState, s: &CensoredStats) -> Result<f64> {
    check(state, s)?;
    Ok(d2theta_unchecked(state.theta, state.sigma2, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn stats(l: f64, u: f64, s1: f64, s2: f64, p_l: f64, p_u: f64, p: f64) -> CensoredStats {
        CensoredStats { l, u, s1, s2, p_l, p_u, p }
    }

    #[test]
    fn reduces_to_gaussian_without_censoring() {
        let z = [0.3, -1.2, 0.8, 2.0, 0.1];
        let s = stats(-10.0, 10.0, z.iter().sum(), z.iter().map(|x| x * x).sum(), 0.0, 0.0, 5.0);
        for (theta, sigma2) in [(0.0, 1.0), (0.4, 2.5), (-1.0, 0.3)] {
            let direct: f64 = z
                .iter()
                .map(|x| -0.5 * (sigma2 as f64).ln() - (x - theta).powi(2) / (2.0 * sigma2))
                .sum();
            let ll = censored_loglik(&LikelihoodState::new(theta, sigma2).unwrap(), &s).unwrap();
            assert!((ll - direct).abs() < 1e-12);
            let g = censored_loglik_dtheta(&LikelihoodState::new(theta, sigma2).unwrap(), &s).unwrap();
            assert!((g - (s.s1 - 5.0 * theta) / sigma2).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_example_against_precise_normal_cdf() {
        // 2·ln Φ(−1) − 0.125, evaluated with 40-digit arithmetic.
        let s = stats(-1.0, 1.0, 0.5, 0.25, 1.0, 1.0, 4.0);
        let ll = censored_loglik(&LikelihoodState::new(0.0, 1.0).unwrap(), &s).unwrap();
        assert!((ll - (-3.807_043_290_018_527)).abs() < 1e-13, "{ll}");
    }

    #[test]
    fn symmetric_stats_have_zero_score_at_origin() {
        let s = stats(-1.3, 1.3, 0.0, 7.0, 3.0, 3.0, 20.0);
        let g = censored_loglik_dtheta(&LikelihoodState::new(0.0, 0.8).unwrap(), &s).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = stats(-1.0, 1.0, 0.5, 0.25, 1.0, 1.0, 4.0);
        assert!(LikelihoodState::new(0.0, 0.0).is_err());
        assert!(censored_loglik(&LikelihoodState { theta: 0.0, sigma2: -1.0 }, &s).is_err());
        assert!(censored_loglik(&LikelihoodState { theta: f64::NAN, sigma2: 1.0 }, &s).is_err());
        let none_left = stats(-1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 4.0);
        assert!(censored_loglik(&LikelihoodState::new(0.0, 1.0).unwrap(), &none_left).is_err());
    }

    #[test]
    fn finite_in_extreme_tails() {
        let s = stats(-1.0, 1.0, 0.5, 0.25, 1.0, 1.0, 4.0);
        let ll = censored_loglik(&LikelihoodState::new(60.0, 1e-2).unwrap(), &s).unwrap();
        assert!(ll.is_finite());
        let g = censored_loglik_dtheta(&LikelihoodState::new(60.0, 1e-2).unwrap(), &s).unwrap();
        assert!(g.is_finite());
    }

    #[test]
    fn second_derivative_is_negative_on_grid() {
        let mut rng = stream(21, &[]);
        for _ in 0..200 {
            let s = stats(
                -rng.random_range(0.1..3.0),
                rng.random_range(0.1..3.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.0..30.0),
                rng.random_range(0.0..20.0),
                rng.random_range(0.0..20.0),
                50.0,
            );
            for theta in [-4.0, -1.0, 0.0, 0.5, 3.0] {
                for sigma2 in [0.05, 0.5, 2.0, 10.0] {
                    let h = censored_loglik_d2theta(&LikelihoodState::new(theta, sigma2).unwrap(), &s).unwrap();
                    assert!(h < 0.0, "h = {h} at θ={theta}, σ²={sigma2}");
                }
            }
        }
    }
}
