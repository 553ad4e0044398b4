//! Maximum-likelihood fit of the censored normal model in `(θ, v = ln σ²)`.
//!
//! Damped Newton ascent inside a box: the gradient is analytic, the
//! `v`-column of the Hessian comes from central differences of the gradient.
//! The variance of `θ̂` is the inverse observed information in `θ` alone.

use serde::{Deserialize, Serialize};

use super::likelihood::{d2theta_unchecked, dtheta_unchecked, loglik_unchecked, CensoredStats};
use crate::error::{invalid, Error, Result};
use crate::normal::mills_lower;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop when the scaled projected gradient falls below `grad_tol·max(1, P)`.
    pub grad_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return invalid("max_iter must be positive");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return invalid(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: f64,
    pub sigma2: f64,
    pub loglik: f64,
    /// `(−∂²ll/∂θ²)⁻¹` at the optimum.
    pub w: f64,
    pub iterations: usize,
    /// The optimum sits on an edge of the search box.
    pub at_boundary: bool,
}

/// Search box: `θ ∈ [l − (u−l), u + (u−l)]`, `σ ∈ [10⁻⁶, 10³]·(u−l)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchBox {
    pub theta: (f64, f64),
    pub v: (f64, f64),
}

impl SearchBox {
    pub fn for_stats(s: &CensoredStats) -> Self {
        let w = s.u - s.l;
        Self {
            theta: (s.l - w, s.u + w),
            v: (2.0 * (1e-6 * w).ln(), 2.0 * (1e3 * w).ln()),
        }
    }

    fn project(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0].clamp(self.theta.0, self.theta.1),
            x[1].clamp(self.v.0, self.v.1),
        ]
    }

    pub fn contains(&self, theta: f64, v: f64) -> bool {
        theta >= self.theta.0 && theta <= self.theta.1 && v >= self.v.0 && v <= self.v.1
    }
}

/// Moment-based starting point, clamped into the box.
pub(crate) fn initial_point(s: &CensoredStats, bx: &SearchBox) -> [f64; 2] {
    let pc = s.p_c();
    let theta = (s.s1 / pc).clamp(bx.theta.0, bx.theta.1);
    let floor = ((s.u - s.l) / 4.0).powi(2);
    let sigma2 = (s.s2 / pc - theta * theta).max(floor);
    bx.project([theta, sigma2.ln()])
}

pub(crate) fn f(x: [f64; 2], s: &CensoredStats) -> f64 {
    loglik_unchecked(x[0], x[1].exp(), s)
}

/// `∂ll/∂v` with `σ² = eᵛ`.
fn dv(theta: f64, v: f64, s: &CensoredStats) -> f64 {
    let sigma2 = v.exp();
    let sigma = sigma2.sqrt();
    let a = (s.l - theta) / sigma;
    let b = (s.u - theta) / sigma;
    let pc = s.p_c();
    let q = s.s2 - 2.0 * theta * s.s1 + pc * theta * theta;
    let mut g = -0.5 * pc + q / (2.0 * sigma2);
    if s.p_l > 0.0 {
        g -= 0.5 * s.p_l * mills_lower(a) * a;
    }
    if s.p_u > 0.0 {
        g += 0.5 * s.p_u * mills_lower(-b) * b;
    }
    g
}

pub(crate) fn gradient(x: [f64; 2], s: &CensoredStats) -> [f64; 2] {
    [dtheta_unchecked(x[0], x[1].exp(), s), dv(x[0], x[1], s)]
}

fn hessian(x: [f64; 2], s: &CensoredStats) -> [[f64; 2]; 2] {
    const H: f64 = 1e-5;
    let hee = d2theta_unchecked(x[0], x[1].exp(), s);
    let gp = gradient([x[0], x[1] + H], s);
    let gm = gradient([x[0], x[1] - H], s);
    let hev = (gp[0] - gm[0]) / (2.0 * H);
    let hvv = (gp[1] - gm[1]) / (2.0 * H);
    [[hee, hev], [hev, hvv]]
}

/// Gradient with components that push out of the box zeroed, scaled so the
/// θ-component is unit-free.
fn projected_scaled(x: [f64; 2], g: [f64; 2], bx: &SearchBox) -> [f64; 2] {
    let sigma = (0.5 * x[1]).exp();
    let mut out = [g[0] * sigma, g[1]];
    if (x[0] <= bx.theta.0 && g[0] < 0.0) || (x[0] >= bx.theta.1 && g[0] > 0.0) {
        out[0] = 0.0;
    }
    if (x[1] <= bx.v.0 && g[1] < 0.0) || (x[1] >= bx.v.1 && g[1] > 0.0) {
        out[1] = 0.0;
    }
    out
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn ascent_direction(x: [f64; 2], g: [f64; 2], h: [[f64; 2]; 2], width: f64) -> [f64; 2] {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let mut d = if h[0][0] < 0.0 && det > 0.0 {
        // Newton: d = −H⁻¹g.
        [
            -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
            -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
        ]
    } else {
        // Diagonally scaled gradient ascent.
        let sigma2 = x[1].exp();
        [
            g[0] / h[0][0].abs().max(1.0 / sigma2),
            g[1] / h[1][1].abs().max(1.0),
        ]
    };
    // Cap the step: at most one box width in θ, a factor e² in σ².
    let cap0 = width / d[0].abs().max(f64::MIN_POSITIVE);
    let cap1 = 2.0 / d[1].abs().max(f64::MIN_POSITIVE);
    let scale = cap0.min(cap1).min(1.0);
    d[0] *= scale;
    d[1] *= scale;
    d
}

/// Backtracking line search with an Armijo condition on the projected step.
fn line_search(
    x: [f64; 2],
    fx: f64,
    g: [f64; 2],
    d: [f64; 2],
    s: &CensoredStats,
    bx: &SearchBox,
) -> Option<([f64; 2], f64)> {
    let mut t = 1.0;
    while t > 1e-12 {
        let y = bx.project([x[0] + t * d[0], x[1] + t * d[1]]);
        let fy = f(y, s);
        let gain = g[0] * (y[0] - x[0]) + g[1] * (y[1] - x[1]);
        if fy.is_finite() && fy >= fx + 1e-4 * gain.max(0.0) && (fy > fx || y == x) {
            return Some((y, fy));
        }
        t *= 0.5;
    }
    None
}

/// Fits `(θ, σ²)` by maximum likelihood.
pub fn fit_censored_mle(s: &CensoredStats, opts: &MleOptions) -> Result<MleFit> {
    s.validate()?;
    opts.validate()?;
    let bx = SearchBox::for_stats(s);
    let width = s.u - s.l;
    let tol = opts.grad_tol * s.p.max(1.0);

    let mut x = initial_point(s, &bx);
    let mut fx = f(x, s);
    let mut iterations = 0;
    let mut converged = false;
    let mut g = gradient(x, s);
    while iterations < opts.max_iter {
        let pg = projected_scaled(x, g, &bx);
        if norm(pg) <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let h = hessian(x, s);
        let mut step = line_search(x, fx, g, ascent_direction(x, g, h, width), s, &bx);
        if step.is_none() {
            // Newton direction failed; retry along the scaled gradient.
            step = line_search(x, fx, g, ascent_direction(x, g, [[0.0, 0.0], [0.0, 0.0]], width), s, &bx);
        }
        match step {
            Some((y, fy)) => {
                let moved = y != x;
                x = y;
                fx = fy;
                g = gradient(x, s);
                if !moved {
                    break;
                }
            }
            None => break,
        }
    }

    if !converged {
        // No further ascent is representable. Accept when the gradient is at
        // the level floating-point noise in ll allows.
        let pg = projected_scaled(x, g, &bx);
        let noise_floor = 1e-9 * (1.0 + fx.abs());
        if !(norm(pg) <= tol.sqrt().max(noise_floor)) {
            return Err(Error::NonConvergence {
                iterations,
                theta: x[0],
                log_sigma2: x[1],
                gradient_norm: norm(pg),
            });
        }
    }

    let info = -d2theta_unchecked(x[0], x[1].exp(), s);
    if !(info > 0.0 && info.is_finite()) {
        return Err(Error::DegenerateInput(format!(
            "observed information {info} at the optimum is not positive"
        )));
    }
    let eps_t = 1e-9 * width;
    let at_boundary = x[0] <= bx.theta.0 + eps_t
        || x[0] >= bx.theta.1 - eps_t
        || x[1] <= bx.v.0 + 1e-9
        || x[1] >= bx.v.1 - 1e-9;
    Ok(MleFit {
        theta: x[0],
        sigma2: x[1].exp(),
        loglik: fx,
        w: 1.0 / info,
        iterations,
        at_boundary,
    })
}
