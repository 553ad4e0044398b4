//! Pooling of `m` independent sanitization passes.
//!
//! With pass estimates `θ̂⁽ʰ⁾` and within-pass variances `ŵ⁽ʰ⁾`:
//! `θ̄ = mean θ̂`, `w = mean ŵ`, `b = var θ̂` (divisor `m−1`),
//! `T = b/m + w` and `ν = (m−1)(1 + m·w/b)²`. Intervals and tests use `t_ν`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{invalid, Result};
use crate::estimators::PointEstimate;
use crate::normal;

/// From here on (and for `ν = ∞`) the CDF is the second-order expansion
/// around the normal, `Φ(x) − φ(x)(g₁(x)/ν + g₂(x)/ν²)`, whose error is
/// `O(ν⁻³)`; the incomplete-beta route loses accuracy at large `ν`.
const EXPANSION_DF: f64 = 1e5;
/// The expansion is only used for `|x|` up to this; beyond it the tail
/// probability is below 1e-15 anyway.
const EXPANSION_MAX_X: f64 = 8.0;

fn check_df(df: f64) -> Result<()> {
    if !(df > 0.0) {
        return invalid(format!("degrees of freedom must be positive, got {df}"));
    }
    Ok(())
}

fn expansion_cdf(x: f64, df: f64) -> f64 {
    let x2 = x * x;
    let g1 = x * (x2 + 1.0) / 4.0;
    let g2 = x * (((3.0 * x2 - 7.0) * x2 - 5.0) * x2 - 3.0) / 96.0;
    let inv = 1.0 / df;
    normal::cdf(x) - normal::pdf(x) * inv * (g1 + g2 * inv)
}

/// `ln(√ν/y)` for `y > 0`, the log-scale of the beta argument.
fn ln_scale(y: f64, df: f64) -> f64 {
    0.5 * df.ln() - y.ln()
}

/// Lower tail `F(−y)` for `y ≥ 0` through `I_x(ν/2, ½)` with
/// `x = ν/(ν + y²)`, formed from `s = √ν/y` so nothing overflows.
fn beta_lower_tail(y: f64, df: f64) -> f64 {
    let a = 0.5 * df;
    if y == 0.0 {
        return 0.5;
    }
    let s = df.sqrt() / y;
    if s < 1e-30 {
        // I_x(a, ½) = x^a/(a·B(a, ½))·(1 + O(x)) and x < 1e-60 here.
        let ln_x = 2.0 * ln_scale(y, df);
        return 0.5 * (a * ln_x - a.ln() - ln_beta(a, 0.5)).exp();
    }
    let s2 = s * s;
    let x = s2 / (1.0 + s2);
    if x < 0.5 {
        0.5 * beta_reg(a, 0.5, x)
    } else {
        0.5 * (1.0 - beta_reg(0.5, a, 1.0 / (1.0 + s2)))
    }
}

fn cdf_unchecked(x: f64, df: f64) -> f64 {
    if df >= EXPANSION_DF && (x.abs() <= EXPANSION_MAX_X || df.is_infinite()) {
        expansion_cdf(x, df)
    } else {
        let lower = beta_lower_tail(x.abs(), df);
        if x <= 0.0 { lower } else { 1.0 - lower }
    }
}

fn pdf_unchecked(x: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal::pdf(x);
    }
    let y = x.abs();
    // ln(1 + y²/ν), split once y²/ν could overflow.
    let ln_kernel = if y * 1e-100 < df.sqrt() {
        (y * y / df).ln_1p()
    } else {
        -2.0 * ln_scale(y, df) + (df / y / y).ln_1p()
    };
    (-0.5 * (df + 1.0) * ln_kernel - 0.5 * df.ln() - ln_beta(0.5 * df, 0.5)).exp()
}

/// `P(T ≤ x)` for `T ~ t_ν`; `ν = ∞` is the standard normal.
pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    Ok(cdf_unchecked(x, df))
}

/// Quantile of `t_ν` by safeguarded Newton iteration on the lower tail.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("probability must lie in (0, 1), got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve F(−y) = a for y > 0 with a = min(p, 1 − p) ≤ ½: lower-tail
    // probabilities carry full relative precision.
    let a = p.min(1.0 - p);
    let g = |y: f64| cdf_unchecked(-y, df) - a;

    // Cornish–Fisher start, then bracket.
    let z = -normal_quantile(a);
    let mut y = z + (z * z * z + z) / (4.0 * df) + (((5.0 * z * z + 16.0) * z * z + 3.0) * z) / (96.0 * df * df);
    if !(y.is_finite() && y > 0.0) {
        y = 1.0;
    }
    let (mut lo, mut hi) = (0.0, y);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(if p < 0.5 { f64::NEG_INFINITY } else { f64::INFINITY });
        }
    }
    y = y.clamp(lo, hi);
    for _ in 0..200 {
        let gy = g(y);
        if gy == 0.0 {
            break;
        }
        if gy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = pdf_unchecked(y, df);
        let newton = y + gy / dens;
        let next = if dens > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - y).abs() <= 4.0 * f64::EPSILON * y.max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi;
        y = next;
        if done {
            break;
        }
    }
    Ok(if p < 0.5 { -y } else { y })
}

/// Standard normal quantile, polished by one Halley step.
fn normal_quantile(p: f64) -> f64 {
    let x = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p);
    let e = normal::cdf(x) - p;
    let u = e / normal::pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Pooled inference from several sanitization passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedInference {
    pub theta: f64,
    pub total_var: f64,
    /// Degrees of freedom; `+∞` (serialized as `null`) for the normal limit.
    #[serde(with = "df_serde")]
    pub df: f64,
    pub m: usize,
    pub w: f64,
    pub b: f64,
    pub gamma: f64,
    pub ci: (f64, f64),
    /// Two-sided p-value for `H₀: θ = 0`.
    pub p_value: f64,
}

mod df_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(df: &f64, s: S) -> Result<S::Ok, S::Error> {
        if df.is_finite() {
            s.serialize_f64(*df)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid(format!("confidence level must lie in (0, 1), got {gamma}"));
    }
    Ok(())
}

impl CombinedInference {
    /// Inference from a single estimate with a known reference distribution.
    pub fn from_single(theta: f64, var: f64, df: f64, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(var > 0.0 && var.is_finite()) {
            return invalid(format!("variance must be positive, got {var}"));
        }
        let mut out = Self {
            theta,
            total_var: var,
            df,
            m: 1,
            w: var,
            b: 0.0,
            gamma,
            ci: (theta, theta),
            p_value: 1.0,
        };
        out.finish()?;
        Ok(out)
    }

    fn finish(&mut self) -> Result<()> {
        let half = t_quantile(0.5 * (1.0 + self.gamma), self.df)? * self.total_var.sqrt();
        self.ci = (self.theta - half, self.theta + half);
        self.p_value = self.p_value_for(0.0)?;
        Ok(())
    }

    pub fn se(&self) -> f64 {
        self.total_var.sqrt()
    }

    /// Two-sided p-value for `H₀: θ = null`.
    pub fn p_value_for(&self, null: f64) -> Result<f64> {
        let t = (self.theta - null) / self.total_var.sqrt();
        Ok((2.0 * t_cdf(-t.abs(), self.df)?).min(1.0))
    }

    pub fn rejects(&self, null: f64, level: f64) -> Result<bool> {
        Ok(self.p_value_for(null)? < level)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }
}

/// Combines raw `(θ̂, ŵ)` pairs.
pub fn combine_values(thetas: &[f64], ws: &[f64], gamma: f64) -> Result<CombinedInference> {
    check_gamma(gamma)?;
    let m = thetas.len();
    if m < 2 {
        return invalid(format!("combining needs at least 2 passes, got {m}"));
    }
    if ws.len() != m {
        return invalid("estimate and variance lists differ in length");
    }
    if thetas.iter().chain(ws).any(|x| !x.is_finite()) {
        return invalid("pass estimates and variances must be finite");
    }
    if let Some(w) = ws.iter().find(|w| **w < 0.0) {
        return invalid(format!("within-pass variance {w} is negative"));
    }
    // Summing in sorted order makes the result independent of pass order.
    let mut thetas = thetas.to_vec();
    let mut ws = ws.to_vec();
    thetas.sort_by(f64::total_cmp);
    ws.sort_by(f64::total_cmp);
    let mf = m as f64;
    let theta = thetas.iter().sum::<f64>() / mf;
    let w = ws.iter().sum::<f64>() / mf;
    let b = thetas.iter().map(|t| (t - theta).powi(2)).sum::<f64>() / (mf - 1.0);
    let total_var = b / mf + w;
    if !(total_var > 0.0) {
        return invalid("total variance is zero: identical estimates with zero within-pass variance");
    }
    let df = if b <= 1e-15 * w {
        f64::INFINITY
    } else {
        (mf - 1.0) * (1.0 + mf * w / b).powi(2)
    };
    let mut out = CombinedInference {
        theta,
        total_var,
        df,
        m,
        w,
        b,
        gamma,
        ci: (theta, theta),
        p_value: 1.0,
    };
    out.finish()?;
    Ok(out)
}

/// Combines pass estimates into one interval and test.
pub fn combine(passes: &[PointEstimate], gamma: f64) -> Result<CombinedInference> {
    let thetas: Vec<f64> = passes.iter().map(|p| p.theta).collect();
    let ws: Vec<f64> = passes.iter().map(|p| p.w).collect();
    combine_values(&thetas, &ws, gamma)
}
