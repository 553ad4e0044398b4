//! Standard normal helpers evaluated in log space.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln φ(x)`.
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x > -20.0 {
        (0.5 * erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        // Asymptotic tail: Φ(x) ≈ φ(x)/|x| · (1 − 1/x² + 3/x⁴ − 15/x⁶ + 105/x⁸ − 945/x¹⁰).
        let y = 1.0 / (x * x);
        let series = 1.0 - y * (1.0 - y * (3.0 - y * (15.0 - y * (105.0 - y * 945.0))));
        log_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Below this the ratio comes from a continued fraction; the log-space
/// difference loses about `x²·ε` relative accuracy.
const CF_SWITCH: f64 = -8.0;

/// `K(t) = 1/(t + 2/(t + 3/(t + …)))`, so that `φ(−t)/Φ(−t) = t + K(t)`.
fn cf_tail(t: f64) -> f64 {
    let mut f = t;
    for k in (2..=120).rev() {
        f = t + k as f64 / f;
    }
    1.0 / f
}

/// Inverse Mills ratio `φ(x)/Φ(x)`.
pub fn mills_lower(x: f64) -> f64 {
    if x < CF_SWITCH {
        -x + cf_tail(-x)
    } else {
        (log_pdf(x) - log_cdf(x)).exp()
    }
}

/// `r(x)·(r(x) + x)` with `r` the inverse Mills ratio, i.e. `−r′(x)`;
/// always in `(0, 1)`, computed without cancellation in the left tail.
pub fn mills_lower_slope(x: f64) -> f64 {
    if x < CF_SWITCH {
        let k = cf_tail(-x);
        (-x + k) * k
    } else {
        let r = mills_lower(x);
        r * (r + x)
    }
}

/// Hazard `φ(x)/(1 − Φ(x))`.
pub fn mills_upper(x: f64) -> f64 {
    mills_lower(-x)
}
