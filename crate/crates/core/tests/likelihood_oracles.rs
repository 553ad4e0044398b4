mod common;

use common::random_stats;
use pacdp_core::estimators::{
    censored_loglik, censored_loglik_d2theta, censored_loglik_dtheta, fit_censored_mle, posterior_mh, CensoredStats,
    LikelihoodState, McmcConfig, MleOptions,
};
use pacdp_core::rng::stream;
use rand::Rng;

fn ll(theta: f64, v: f64, s: &CensoredStats) -> f64 {
    censored_loglik(&LikelihoodState::new(theta, v.exp()).unwrap(), s).unwrap()
}

/// Five-point central difference.
fn diff5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn sample_var(s: &CensoredStats) -> f64 {
    let pc = s.p_c();
    ((s.s2 - s.s1 * s.s1 / pc) / (pc - 1.0)).max(1e-6)
}

#[test]
fn theta_derivatives_match_finite_differences() {
    for k in 0..100 {
        let s = random_stats(300, k);
        let mut rng = stream(301, &[k]);
        let sigma2 = sample_var(&s) * rng.random_range(0.5..2.0);
        let sd = sigma2.sqrt();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let theta = s.s1 / s.p_c() + sign * rng.random_range(0.3..2.0) * sd;
        let st = LikelihoodState::new(theta, sigma2).unwrap();
        let h = 1e-3 * sd;

        let f = |t: f64| censored_loglik(&LikelihoodState::new(t, sigma2).unwrap(), &s).unwrap();
        let g = |t: f64| censored_loglik_dtheta(&LikelihoodState::new(t, sigma2).unwrap(), &s).unwrap();
        let d1 = censored_loglik_dtheta(&st, &s).unwrap();
        let d2 = censored_loglik_d2theta(&st, &s).unwrap();
        assert!(rel(d1, diff5(f, theta, h)) < 1e-6, "instance {k}: d1 {d1} vs {}", diff5(f, theta, h));
        assert!(rel(d2, diff5(g, theta, h)) < 1e-6, "instance {k}: d2 {d2} vs {}", diff5(g, theta, h));
    }
}

/// Zooming 2-D grid search over (θ, ln σ²).
fn grid_argmax(s: &CensoredStats) -> f64 {
    let v0 = sample_var(s).ln();
    let (mut tlo, mut thi) = (s.l - (s.u - s.l), s.u + (s.u - s.l));
    let (mut vlo, mut vhi) = (v0 - 4.0, v0 + 4.0);
    let n = 80;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for _ in 0..14 {
        let (dt, dv) = ((thi - tlo) / n as f64, (vhi - vlo) / n as f64);
        best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let (t, v) = (tlo + i as f64 * dt, vlo + j as f64 * dv);
                let val = ll(t, v, s);
                if val > best.0 {
                    best = (val, t, v);
                }
            }
        }
        tlo = best.1 - 3.0 * dt;
        thi = best.1 + 3.0 * dt;
        vlo = best.2 - 3.0 * dv;
        vhi = best.2 + 3.0 * dv;
    }
    best.1
}

#[test]
fn mle_matches_grid_search() {
    for k in 0..20 {
        let s = random_stats(310, k);
        let fit = fit_censored_mle(&s, &MleOptions::default()).unwrap();
        let grid = grid_argmax(&s);
        assert!((fit.theta - grid).abs() < 1e-3, "instance {k}: mle {} grid {grid}", fit.theta);
    }
}

/// Posterior mean of θ under the σ⁻² prior by trapezoid quadrature in
/// (θ, v = ln σ²), where the prior and Jacobian cancel.
fn quadrature_mean(s: &CensoredStats) -> f64 {
    let fit = fit_censored_mle(s, &MleOptions::default()).unwrap();
    let v_hat = fit.sigma2.ln();
    let sd_t = fit.w.sqrt();
    let sd_v = (2.0 / s.p_c()).sqrt();
    let n = 600;
    let (t0, t1) = (fit.theta - 10.0 * sd_t, fit.theta + 10.0 * sd_t);
    let (v0, v1) = (v_hat - 10.0 * sd_v, v_hat + 10.0 * sd_v);
    let mut logs = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        let t = t0 + (t1 - t0) * i as f64 / n as f64;
        for j in 0..=n {
            let v = v0 + (v1 - v0) * j as f64 / n as f64;
            let wt = if i == 0 || i == n { 0.5 } else { 1.0 } * if j == 0 || j == n { 0.5 } else { 1.0 };
            logs.push((t, ll(t, v, s) + f64::ln(wt)));
        }
    }
    let mx = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let (num, den) = logs.iter().fold((0.0, 0.0), |(a, b), &(t, lw)| {
        let e = (lw - mx).exp();
        (a + t * e, b + e)
    });
    num / den
}

#[test]
fn posterior_mean_matches_quadrature() {
    for k in 0..5 {
        let s = random_stats(320, k);
        let quad = quadrature_mean(&s);
        let post = posterior_mh(&s, &McmcConfig::default(), &mut stream(321, &[k])).unwrap();
        assert!(
            (post.mean - quad).abs() < 3.0 * post.mc_se,
            "instance {k}: mh {} ± {} vs quadrature {quad}",
            post.mean,
            post.mc_se
        );
    }
}

#[test]
fn mle_is_scale_covariant() {
    for k in 0..20 {
        let s = random_stats(330, k);
        let base = fit_censored_mle(&s, &MleOptions::default()).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e3] {
            let scaled = CensoredStats {
                l: c * s.l,
                u: c * s.u,
                s1: c * s.s1,
                s2: c * c * s.s2,
                ..s
            };
            let fit = fit_censored_mle(&scaled, &MleOptions::default()).unwrap();
            let tol = 1e-6 * (c * base.theta).abs().max(c * base.sigma2.sqrt() * 1e-3);
            assert!(
                (fit.theta - c * base.theta).abs() <= tol,
                "instance {k}, c={c}: {} vs {}",
                fit.theta,
                c * base.theta
            );
        }
    }
}
