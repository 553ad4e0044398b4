//! Model-free winsorized and trimmed means, and the naïve plug-in estimator
//! that ignores censoring.

use crate::ceil_count;
use crate::error::{invalid, Error, Result};
use crate::pac::{pac_summaries, PACData};

fn require_symmetric(alpha: f64, beta: f64) -> Result<()> {
    if alpha != beta {
        return invalid(format!(
            "winsorized and trimmed means need alpha == beta, got ({alpha}, {beta})"
        ));
    }
    Ok(())
}

/// Shared bracket `a·(l−θ)² + b·(u−θ)² + s₂/P − (1−a−b)·θ²`.
fn bracket(a: f64, b: f64, l: f64, u: f64, s2: f64, p: f64, theta: f64) -> f64 {
    a * (l - theta).powi(2) + b * (u - theta).powi(2) + s2 / p - (1.0 - a - b) * theta * theta
}

/// Non-private winsorized mean and the variance of that mean.
///
/// The variance uses the moment form with the observed censoring fractions
/// `P_l/P`, `P_u/P` in place of `α`, `β`.
pub fn winsorized_stats(d: &PACData) -> Result<(f64, f64)> {
    require_symmetric(d.alpha, d.beta)?;
    let s = pac_summaries(d);
    let pc = s.p - s.p_l - s.p_u;
    if pc < 2 {
        return Err(Error::DegenerateInput(format!(
            "winsorized variance needs at least 2 uncensored partitions, got {pc}"
        )));
    }
    let p = s.p as f64;
    let a = s.p_l as f64 / p;
    let b = s.p_u as f64 / p;
    let theta = a * s.l + b * s.u + s.s1 / p;
    let var = (p - 1.0) / ((pc as f64 - 1.0).powi(2)) * bracket(a, b, s.l, s.u, s.s2, p, theta);
    Ok((theta, var))
}

/// Multiplier turning the winsorized variance into the trimmed one.
pub fn trimmed_variance_ratio(p: usize, p_c: usize) -> f64 {
    let (p, pc) = (p as f64, p_c as f64);
    p * (pc - 1.0) / (pc * (p - 1.0))
}

/// Non-private trimmed mean and the variance of that mean.
pub fn trimmed_stats(d: &PACData) -> Result<(f64, f64)> {
    let (_, var_w) = winsorized_stats(d)?;
    let s = pac_summaries(d);
    let pc = s.p - s.p_l - s.p_u;
    Ok((s.s1 / pc as f64, trimmed_variance_ratio(s.p, pc) * var_w))
}

fn check_plugin(p: f64, alpha: f64, beta: f64) -> Result<f64> {
    let pc = p * (1.0 - alpha - beta);
    if !(pc > 1.0) {
        return Err(Error::DegenerateInput(format!(
            "P(1-alpha-beta) = {pc} leaves fewer than 2 uncensored partitions"
        )));
    }
    Ok(pc)
}

/// Winsorized mean from sanitized `(l*, u*, s′₁*, s′₂*)`, with the expected
/// censored fractions `α`, `β`.
pub fn winsorized_sanitized(
    l: f64,
    u: f64,
    s1: f64,
    s2: f64,
    p: f64,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    require_symmetric(alpha, beta)?;
    let pc = check_plugin(p, alpha, beta)?;
    let theta = alpha * l + beta * u + s1 / p;
    let var = (p - 1.0) / (pc - 1.0).powi(2) * bracket(alpha, beta, l, u, s2, p, theta);
    Ok((theta, var))
}

/// Trimmed mean from sanitized `(l*, u*, s′₁*, s′₂*)`.
pub fn trimmed_sanitized(
    l: f64,
    u: f64,
    s1: f64,
    s2: f64,
    p: f64,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    require_symmetric(alpha, beta)?;
    let pc = check_plugin(p, alpha, beta)?;
    let theta = s1 / pc;
    let var = bracket(alpha, beta, l, u, s2, p, theta) / ((1.0 - alpha - beta) * (pc - 1.0));
    Ok((theta, var))
}

/// Naïve plug-in that treats the uncensored values as a complete normal
/// sample of public size `P′_c = ⌈P(1−α−β)⌉`.
pub fn naive_sanitized(s1: f64, s2: f64, p: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let pc = ceil_count(p * (1.0 - alpha - beta));
    if pc < 2.0 {
        return Err(Error::DegenerateInput(format!(
            "naive estimator needs P'_c >= 2, got {pc}"
        )));
    }
    let theta = s1 / pc;
    let var = (s2 - s1 * s1 / pc) / ((pc - 1.0) * pc);
    Ok((theta, var))
}
