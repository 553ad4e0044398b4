//! One sanitization pass: private bounds, censoring, noisy statistics,
//! repair, then the method's estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::CensoredStats;
use super::mcmc::{posterior_mh, McmcConfig};
use super::mle::{fit_censored_mle, MleOptions};
use super::robust::{naive_sanitized, trimmed_sanitized, winsorized_sanitized};
use super::{repair_bounds, Diagnostics, Inference, Method, MethodSpec, PointEstimate, SanitizedStats};
use crate::error::{invalid, Error, Result};
use crate::pac::{
    censor_at_sample_quantiles, pac_summaries, recompute_with_sanitized_bounds, PartitionDifferences,
    PnoCStats,
};
use crate::privacy::{BudgetLedger, GlobalBounds, MechanismSpec, PrivacyBudget, Share};
use crate::quantile::{private_quantile, QuantileRequest};

/// Result of one pass, with the budget it spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassOutcome {
    pub estimate: PointEstimate,
    pub ledger: BudgetLedger,
    pub stats: Option<SanitizedStats>,
}

/// Censored-likelihood MLE; `ŵ*` is the inverse observed information in θ.
pub fn mle_censored(s: &SanitizedStats, opts: &MleOptions) -> Result<PointEstimate> {
    let fit = fit_censored_mle(&s.censored()?, opts)?;
    let mut diag = Diagnostics {
        iterations: Some(fit.iterations),
        ..Default::default()
    };
    if fit.at_boundary {
        diag.notes.push("optimum on the edge of the search box".into());
    }
    PointEstimate::floored(fit.theta, fit.w, diag)
}

/// Posterior mean and variance of θ under the Jeffreys prior.
pub fn posterior_estimate<R: Rng + ?Sized>(
    s: &SanitizedStats,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<PointEstimate> {
    let post = posterior_mh(&s.censored()?, cfg, rng)?;
    let diag = Diagnostics {
        iterations: Some(cfg.iterations),
        acceptance_rate: Some(post.acceptance_rate),
        mc_se: Some(post.mc_se),
        ..Default::default()
    };
    PointEstimate::floored(post.mean, post.variance, diag)
}

fn two_s_formula(s1: f64, s2: f64, p: f64) -> Result<(f64, f64)> {
    if !(p >= 2.0) {
        return Err(Error::DegenerateInput(format!(
            "2S variance needs at least 2 partitions, got {p}"
        )));
    }
    Ok((s1 / p, (s2 - s1 * s1 / p) / (p * (p - 1.0))))
}

/// Applies the estimator of `spec.method` to already sanitized statistics.
pub fn estimate_from_stats<R: Rng + ?Sized>(
    stats: &SanitizedStats,
    spec: &MethodSpec,
    rng: &mut R,
) -> Result<PointEstimate> {
    let method = spec.method;
    if method.is_likelihood() {
        return match spec.inference {
            Inference::Mle => mle_censored(stats, &spec.mle),
            Inference::Bayes => posterior_estimate(stats, &spec.mcmc, rng),
        };
    }
    let (theta, w) = match (*stats, method) {
        (SanitizedStats::TwoS { s1, s2, p }, Method::TwoS | Method::Original) => two_s_formula(s1, s2, p)?,
        (SanitizedStats::FourS { l, u, s1, s2, p, alpha, beta }, Method::Winsorized) => {
            winsorized_sanitized(l, u, s1, s2, p, alpha, beta)?
        }
        (SanitizedStats::FourS { l, u, s1, s2, p, alpha, beta }, Method::Trimmed) => {
            trimmed_sanitized(l, u, s1, s2, p, alpha, beta)?
        }
        (SanitizedStats::FourS { s1, s2, p, alpha, beta, .. }, Method::Naive) => {
            naive_sanitized(s1, s2, p, alpha, beta)?
        }
        (other, m) => return invalid(format!("method {m} cannot use statistics {other:?}")),
    };
    PointEstimate::floored(theta, w, Diagnostics::default())
}

fn two_s_pass<R: Rng + ?Sized>(
    z: &[f64],
    bounds: &GlobalBounds,
    b1: PrivacyBudget,
    b2: PrivacyBudget,
    rng: &mut R,
) -> Result<(PointEstimate, SanitizedStats)> {
    if z.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "2S needs at least 2 partitions, got {}",
            z.len()
        )));
    }
    if let Some(x) = z.iter().find(|x| !bounds.contains(**x)) {
        return invalid(format!("partition difference {x} lies outside [{}, {}]", bounds.lower, bounds.upper));
    }
    let raw = PnoCStats {
        s1: z.iter().sum(),
        s2: z.iter().map(|x| x * x).sum(),
        p: z.len(),
    };
    let d1 = bounds.width();
    let d2 = bounds.lower.powi(2).max(bounds.upper.powi(2));
    let s1 = MechanismSpec::new(d1, b1)?.sanitize(raw.s1, rng)?;
    let s2 = MechanismSpec::new(d2, b2)?.sanitize(raw.s2, rng)?;
    let p = raw.p as f64;
    let (theta, w) = two_s_formula(s1, s2, p)?;
    Ok((
        PointEstimate::floored(theta, w, Diagnostics::default())?,
        SanitizedStats::TwoS { s1, s2, p },
    ))
}

/// The uncensored baseline: noisy `s₁`, `s₂`, each with half the budget.
pub fn estimate_2s<R: Rng + ?Sized>(
    z: &PartitionDifferences,
    bounds: &GlobalBounds,
    budget: PrivacyBudget,
    rng: &mut R,
) -> Result<PointEstimate> {
    bounds.validate()?;
    budget.require_positive()?;
    let half = budget.split(2)?;
    Ok(two_s_pass(&z.z, bounds, half[0], half[1], rng)?.0)
}

/// Non-private censored statistics at the sample quantiles, with the
/// observed censoring counts.
pub fn nonprivate_censored_stats(z: &PartitionDifferences, alpha: f64, beta: f64) -> Result<CensoredStats> {
    let s = pac_summaries(&censor_at_sample_quantiles(z, alpha, beta)?);
    Ok(CensoredStats {
        l: s.l,
        u: s.u,
        s1: s.s1,
        s2: s.s2,
        p_l: s.p_l as f64,
        p_u: s.p_u as f64,
        p: s.p as f64,
    })
}

/// One full sanitization pass of `spec.method` over partition differences.
///
/// Randomness is drawn in a fixed order: `l*`, `u*`, `s′₁*`, `s′₂*`, then the
/// counts (6-statistic methods), then the sampler (Bayes).
pub fn estimate_pac<R: Rng + ?Sized>(
    z: &PartitionDifferences,
    spec: &MethodSpec,
    rng: &mut R,
) -> Result<PassOutcome> {
    spec.validate()?;
    match spec.method {
        Method::Original => {
            let raw = PnoCStats::from_differences(z);
            let stats = SanitizedStats::TwoS {
                s1: raw.s1,
                s2: raw.s2,
                p: raw.p as f64,
            };
            let estimate = estimate_from_stats(&stats, spec, rng)?;
            let ledger = BudgetLedger::new(PrivacyBudget {
                flavor: spec.budget_per_pass.flavor,
                value: 0.0,
            });
            Ok(PassOutcome {
                estimate,
                ledger,
                stats: Some(stats),
            })
        }
        Method::TwoS => {
            let mut ledger = BudgetLedger::new(spec.budget_per_pass);
            let b1 = ledger.charge("s1", Share::new(1, 2))?;
            let b2 = ledger.charge("s2", Share::new(1, 2))?;
            let clamped: Vec<f64> = z.z.iter().map(|&x| spec.bounds.clamp(x)).collect();
            let n_clamped = z.z.iter().zip(&clamped).filter(|(a, b)| a != b).count();
            let (mut estimate, stats) = two_s_pass(&clamped, &spec.bounds, b1, b2, rng)?;
            estimate.diagnostics.clamped = n_clamped;
            if n_clamped > 0 {
                estimate
                    .diagnostics
                    .notes
                    .push(format!("{n_clamped} partition differences clamped into the global bounds"));
            }
            Ok(PassOutcome {
                estimate,
                ledger,
                stats: Some(stats),
            })
        }
        _ => {
            let share = Share::new(1, spec.method.stat_count());
            let mut ledger = BudgetLedger::new(spec.budget_per_pass);
            let bl = ledger.charge("l", share)?;
            let l_star = private_quantile(&z.z, &QuantileRequest::new(spec.alpha, spec.bounds, bl)?, rng)?;
            let bu = ledger.charge("u", share)?;
            let u_star = private_quantile(&z.z, &QuantileRequest::new(1.0 - spec.beta, spec.bounds, bu)?, rng)?;
            estimate_pac_given_bounds(z, spec, l_star, u_star, ledger, rng)
        }
    }
}

/// The pass after `(l*, u*)` have been released; `ledger` already holds
/// their charges.
pub fn estimate_pac_given_bounds<R: Rng + ?Sized>(
    z: &PartitionDifferences,
    spec: &MethodSpec,
    l_star: f64,
    u_star: f64,
    mut ledger: BudgetLedger,
    rng: &mut R,
) -> Result<PassOutcome> {
    spec.validate()?;
    let method = spec.method;
    if !method.is_censored() {
        return invalid(format!("{method} does not censor"));
    }
    let mut notes = Vec::new();
    let (l_star, u_star) = repair_bounds(l_star, u_star, spec.bounds.width(), &mut notes);

    let data = if method.doubles_down() {
        recompute_with_sanitized_bounds(z, l_star, u_star, spec.alpha, spec.beta)?
    } else {
        censor_at_sample_quantiles(z, spec.alpha, spec.beta)?
    };
    let raw = pac_summaries(&data);

    let share = Share::new(1, method.stat_count());
    let d1 = u_star - l_star;
    let d2 = u_star.powi(2).max(l_star.powi(2));
    let s1 = MechanismSpec::new(d1, ledger.charge("s1'", share)?)?.sanitize(raw.s1, rng)?;
    let s2 = MechanismSpec::new(d2, ledger.charge("s2'", share)?)?.sanitize(raw.s2, rng)?;
    let p = raw.p as f64;
    let mut stats = match method {
        Method::SixS | Method::SixSDD => {
            let p_l = MechanismSpec::new(1.0, ledger.charge("P_l", share)?)?.sanitize(raw.p_l as f64, rng)?;
            let p_u = MechanismSpec::new(1.0, ledger.charge("P_u", share)?)?.sanitize(raw.p_u as f64, rng)?;
            SanitizedStats::SixS {
                l: l_star,
                u: u_star,
                s1,
                s2,
                p_l,
                p_u,
                p,
            }
        }
        _ => SanitizedStats::FourS {
            l: l_star,
            u: u_star,
            s1,
            s2,
            p,
            alpha: spec.alpha,
            beta: spec.beta,
        },
    };
    notes.extend(stats.repair(spec.bounds.width()));

    let mut estimate = estimate_from_stats(&stats, spec, rng)?;
    notes.append(&mut estimate.diagnostics.notes);
    estimate.diagnostics.notes = notes;
    Ok(PassOutcome {
        estimate,
        ledger,
        stats: Some(stats),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pac::sample_quantile;
    use crate::rng::stream;
    use rand_distr::{Distribution, Normal};

    fn gaussian_z(seed: u64, p: usize, mean: f64, sd: f64) -> PartitionDifferences {
        let mut rng = stream(seed, &[]);
        let d = Normal::new(mean, sd).unwrap();
        PartitionDifferences::new((0..p).map(|_| d.sample(&mut rng)).collect()).unwrap()
    }

    fn spec(method: Method, inference: Inference, budget: PrivacyBudget) -> MethodSpec {
        MethodSpec::new(method, inference, 0.1, 0.1, GlobalBounds::new(-10.0, 10.0).unwrap(), budget).unwrap()
    }

    #[test]
    fn two_s_noise_free_stub() {
        let (t, w) = two_s_formula(10.0, 30.0, 5.0).unwrap();
        assert_eq!((t, w), (2.0, 0.5));
        assert!(two_s_formula(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn two_s_errors() {
        let b = GlobalBounds::new(-1.0, 1.0).unwrap();
        let e = PrivacyBudget::pure(1.0).unwrap();
        let mut rng = stream(50, &[]);
        let one = PartitionDifferences::new(vec![0.5]).unwrap();
        assert!(estimate_2s(&one, &b, e, &mut rng).is_err());
        let out = PartitionDifferences::new(vec![0.5, 3.0]).unwrap();
        assert!(estimate_2s(&out, &b, e, &mut rng).is_err());
    }

    #[test]
    fn two_s_high_budget_tracks_mean() {
        let z = gaussian_z(51, 1000, 0.3, 1.0);
        let b = GlobalBounds::new(-10.0, 10.0).unwrap();
        let est = estimate_2s(&z, &b, PrivacyBudget::pure(50.0).unwrap(), &mut stream(52, &[])).unwrap();
        assert!((est.theta - z.mean()).abs() < 1e-2, "{} vs {}", est.theta, z.mean());
    }

    #[test]
    fn pass_spends_exactly_its_budget() {
        let z = gaussian_z(53, 200, 0.0, 1.0);
        for method in Method::ALL.into_iter().filter(|m| m.is_private()) {
            for budget in [PrivacyBudget::pure(1.3).unwrap(), PrivacyBudget::zcdp(0.7).unwrap()] {
                let s = spec(method, Inference::Mle, budget);
                let out = estimate_pac(&z, &s, &mut stream(54, &[])).unwrap();
                assert!(out.ledger.is_exhausted(), "{method}");
                assert_eq!(out.ledger.spent(), budget);
                assert_eq!(out.ledger.entries.len() as u64, method.stat_count());
            }
        }
    }

    #[test]
    fn dd_matches_plain_when_bounds_equal_sample_quantiles() {
        let z = gaussian_z(55, 300, 0.2, 1.0);
        let l = sample_quantile(&z.z, 0.1).unwrap();
        let u = sample_quantile(&z.z, 0.9).unwrap();
        for (plain, dd) in [(Method::FourS, Method::FourSDD), (Method::SixS, Method::SixSDD)] {
            let budget = PrivacyBudget::pure(2.0).unwrap();
            let run = |m: Method| {
                let s = spec(m, Inference::Mle, budget);
                let mut ledger = BudgetLedger::new(budget);
                let share = Share::new(1, m.stat_count());
                ledger.charge("l", share).unwrap();
                ledger.charge("u", share).unwrap();
                estimate_pac_given_bounds(&z, &s, l, u, ledger, &mut stream(56, &[])).unwrap()
            };
            let a = run(plain);
            let b = run(dd);
            assert_eq!(a.stats, b.stats);
            assert_eq!(a.estimate.theta.to_bits(), b.estimate.theta.to_bits());
            assert_eq!(a.estimate.w.to_bits(), b.estimate.w.to_bits());
        }
    }

    #[test]
    fn closed_form_stubs() {
        let mut rng = stream(57, &[]);
        let budget = PrivacyBudget::pure(1.0).unwrap();
        let stats = SanitizedStats::FourS { l: -1.0, u: 1.0, s1: 4.0, s2: 3.0, p: 10.0, alpha: 0.1, beta: 0.1 };
        let w = estimate_from_stats(&stats, &spec(Method::Winsorized, Inference::Mle, budget), &mut rng).unwrap();
        assert!((w.theta - 0.4).abs() < 1e-15);
        let t = estimate_from_stats(&stats, &spec(Method::Trimmed, Inference::Mle, budget), &mut rng).unwrap();
        assert!((t.theta - 0.5).abs() < 1e-15);
        let two = SanitizedStats::TwoS { s1: 10.0, s2: 30.0, p: 5.0 };
        let e = estimate_from_stats(&two, &spec(Method::TwoS, Inference::Mle, budget), &mut rng).unwrap();
        assert_eq!((e.theta, e.w), (2.0, 0.5));
        assert!(estimate_from_stats(&two, &spec(Method::Winsorized, Inference::Mle, budget), &mut rng).is_err());
    }

    #[test]
    fn four_s_high_budget_tracks_nonprivate_mle() {
        // Difference SD comparable to a 10⁵-user Gaussian split into 100 partitions;
        // total ε = 50 spread over four passes.
        let s = spec(Method::FourS, Inference::Mle, PrivacyBudget::pure(12.5).unwrap());
        let mut diffs = 0.0;
        for r in 0..20u64 {
            let z = gaussian_z(58 + r, 100, 0.5, 0.26);
            let oracle = fit_censored_mle(&nonprivate_censored_stats(&z, 0.1, 0.1).unwrap(), &MleOptions::default())
                .unwrap()
                .theta;
            let mean = (0..4u64)
                .map(|k| estimate_pac(&z, &s, &mut stream(59, &[r, k])).unwrap().estimate.theta)
                .sum::<f64>()
                / 4.0;
            diffs += (mean - oracle).abs();
        }
        assert!(diffs / 20.0 < 0.01, "mean |diff| {}", diffs / 20.0);
    }

    #[test]
    fn same_stream_same_pass() {
        let z = gaussian_z(60, 100, 0.0, 1.0);
        let s = spec(Method::SixSDD, Inference::Bayes, PrivacyBudget::zcdp(0.5).unwrap());
        let a = estimate_pac(&z, &s, &mut stream(61, &[3])).unwrap();
        let b = estimate_pac(&z, &s, &mut stream(61, &[3])).unwrap();
        assert_eq!(a, b);
    }
}
