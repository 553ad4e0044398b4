//! Random-walk Metropolis–Hastings on `(θ, v = ln σ²)`.
//!
//! Under the prior `π(θ, σ²) ∝ σ⁻²` the Jacobian of `σ² = eᵛ` cancels the
//! prior, so the target density in `(θ, v)` is simply `exp(ll)`. The sampler
//! is confined to the same box as the optimizer.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::{d2theta_unchecked, CensoredStats};
use super::mle::{f, fit_censored_mle, initial_point, MleOptions, SearchBox};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Initial proposal SD for θ; derived from the curvature when absent.
    pub theta_scale: Option<f64>,
    /// Initial proposal SD for `ln σ²`.
    pub log_sigma2_scale: Option<f64>,
    pub target_acceptance: f64,
    pub thin: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            theta_scale: None,
            log_sigma2_scale: None,
            target_acceptance: 0.3,
            thin: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return invalid(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            ));
        }
        for (name, s) in [("theta_scale", self.theta_scale), ("log_sigma2_scale", self.log_sigma2_scale)] {
            if let Some(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return invalid(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return invalid("target_acceptance must lie in (0, 1)");
        }
        if self.thin == 0 {
            return invalid("thin must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    /// Batch-means Monte-Carlo standard error of `mean`.
    pub mc_se: f64,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    pub draws: usize,
}

const ADAPT_BATCH: usize = 50;
const BATCHES: usize = 20;
const OPTIMAL_RW: f64 = 1.7; // 2.4/√2 for a 2-D target

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Posterior mean and variance of θ from a random-walk sampler.
pub fn posterior_mh<R: Rng + ?Sized>(
    s: &CensoredStats,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorSummary> {
    s.validate()?;
    cfg.validate()?;
    let bx = SearchBox::for_stats(s);

    // Start at the mode when it can be found; it shortens burn-in a lot.
    let mut x = match fit_censored_mle(s, &MleOptions::default()) {
        Ok(fit) => [fit.theta, fit.sigma2.ln()],
        Err(_) => initial_point(s, &bx),
    };
    let mut fx = f(x, s);

    let info = -d2theta_unchecked(x[0], x[1].exp(), s);
    let theta_sd = if info > 0.0 && info.is_finite() {
        info.sqrt().recip()
    } else {
        (s.u - s.l) / s.p.sqrt()
    };
    let mut scale = [
        cfg.theta_scale.unwrap_or(OPTIMAL_RW * theta_sd),
        cfg.log_sigma2_scale
            .unwrap_or(OPTIMAL_RW * (2.0 / s.p_c().max(1.0)).sqrt()),
    ];

    let kept_cap = (cfg.iterations - cfg.burn_in).div_ceil(cfg.thin);
    let mut kept = Vec::with_capacity(kept_cap);
    let mut burn_trace: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut batch_acc = 0usize;
    let mut post_acc = 0usize;
    let mut rescaled = false;

    for it in 0..cfg.iterations {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let y = [x[0] + scale[0] * z0, x[1] + scale[1] * z1];
        let u: f64 = rng.random();
        let accepted = if bx.contains(y[0], y[1]) {
            let fy = f(y, s);
            if fy.is_finite() && u.ln() < fy - fx {
                x = y;
                fx = fy;
                true
            } else {
                false
            }
        } else {
            false
        };

        if it < cfg.burn_in {
            burn_trace[0].push(x[0]);
            burn_trace[1].push(x[1]);
            batch_acc += accepted as usize;
            if (it + 1) % ADAPT_BATCH == 0 {
                let rate = batch_acc as f64 / ADAPT_BATCH as f64;
                let factor = (rate - cfg.target_acceptance).exp();
                scale[0] *= factor;
                scale[1] *= factor;
                batch_acc = 0;
            }
            // Halfway through burn-in, match per-coordinate scales to the
            // spread seen so far.
            if !rescaled && it + 1 == cfg.burn_in / 2 && burn_trace[0].len() >= 100 {
                let half = burn_trace[0].len() / 2;
                for k in 0..2 {
                    let sd = sample_sd(&burn_trace[k][half..]);
                    if sd > 0.0 && sd.is_finite() {
                        scale[k] = OPTIMAL_RW * sd;
                    }
                }
                rescaled = true;
            }
        } else {
            post_acc += accepted as usize;
            if (it - cfg.burn_in) % cfg.thin == 0 {
                kept.push(x[0]);
            }
        }
    }

    let n = kept.len();
    let mean = kept.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let mc_se = if n >= 2 * BATCHES {
        let len = n / BATCHES;
        let means: Vec<f64> = (0..BATCHES)
            .map(|b| kept[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        sample_sd(&means) / (BATCHES as f64).sqrt()
    } else {
        (variance / n as f64).sqrt()
    };
    Ok(PosteriorSummary {
        mean,
        variance,
        mc_se,
        acceptance_rate: post_acc as f64 / (cfg.iterations - cfg.burn_in) as f64,
        draws: n,
    })
}
