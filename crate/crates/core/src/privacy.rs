//! Privacy budgets, additive-noise mechanisms and budget accounting.
//!
//! Two flavors of privacy loss are supported: pure ε-DP (sanitized with the
//! Laplace mechanism, composed by summing ε) and ρ-zCDP (sanitized with the
//! Gaussian mechanism, composed by summing ρ). Conversions between flavors are
//! always explicit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    PureDp,
    Zcdp,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::PureDp => "pure_dp",
            Flavor::Zcdp => "zcdp",
        })
    }
}

/// A privacy-loss quantity: ε for [`Flavor::PureDp`], ρ for [`Flavor::Zcdp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub flavor: Flavor,
    pub value: f64,
}

impl PrivacyBudget {
    pub fn new(flavor: Flavor, value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return invalid(format!("privacy budget must be finite and >= 0, got {value}"));
        }
        Ok(Self { flavor, value })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(Flavor::PureDp, epsilon)
    }

    pub fn zcdp(rho: f64) -> Result<Self> {
        Self::new(Flavor::Zcdp, rho)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.flavor, self.value).map(|_| ())
    }

    /// Rejects budgets that would release nothing.
    pub fn require_positive(&self) -> Result<()> {
        self.validate()?;
        if self.value == 0.0 {
            return invalid("a zero privacy budget cannot fund a release");
        }
        Ok(())
    }

    pub fn split(&self, k: usize) -> Result<Vec<PrivacyBudget>> {
        split_budget(*self, k)
    }
}

impl std::fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.flavor {
            Flavor::PureDp => write!(f, "epsilon={}", self.value),
            Flavor::Zcdp => write!(f, "rho={}", self.value),
        }
    }
}

/// Equal division of a budget into `k` parts.
pub fn split_budget(b: PrivacyBudget, k: usize) -> Result<Vec<PrivacyBudget>> {
    b.validate()?;
    if k == 0 {
        return invalid("cannot split a budget into 0 parts");
    }
    let part = PrivacyBudget {
        flavor: b.flavor,
        value: b.value / k as f64,
    };
    Ok(vec![part; k])
}

/// Sequential composition: ε adds under pure DP, ρ adds under zCDP.
pub fn compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    let first = match budgets.first() {
        Some(b) => b,
        None => return invalid("cannot compose an empty list of budgets"),
    };
    // Neumaier-compensated sum so equal splits compose back to within an ulp.
    let (mut total, mut carry) = (0.0f64, 0.0f64);
    for b in budgets {
        b.validate()?;
        if b.flavor != first.flavor {
            return invalid(format!(
                "cannot compose {} with {} without an explicit conversion",
                first.flavor, b.flavor
            ));
        }
        let t = total + b.value;
        carry += if total.abs() >= b.value.abs() {
            (total - t) + b.value
        } else {
            (b.value - t) + total
        };
        total = t;
    }
    Ok(PrivacyBudget {
        flavor: first.flavor,
        value: total + carry,
    })
}

/// ε of the (ε, δ)-DP guarantee implied by ρ-zCDP: `ρ + 2·sqrt(ρ·ln(1/δ))`.
pub fn zcdp_to_approx_dp(rho: f64, delta: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 0.0) {
        return invalid(format!("rho must be finite and >= 0, got {rho}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// ε to hand to an exponential mechanism. A ρ-zCDP budget maps to
/// `ε = 2·sqrt(2ρ)` because the ε-DP exponential mechanism is `ε²/8`-zCDP.
pub fn exp_mech_epsilon(b: PrivacyBudget) -> Result<f64> {
    b.require_positive()?;
    Ok(match b.flavor {
        Flavor::PureDp => b.value,
        Flavor::Zcdp => 2.0 * (2.0 * b.value).sqrt(),
    })
}

fn check_sensitivity(sensitivity: f64) -> Result<()> {
    if !(sensitivity.is_finite() && sensitivity >= 0.0) {
        return invalid(format!("sensitivity must be finite and >= 0, got {sensitivity}"));
    }
    Ok(())
}

/// One Laplace(0, scale) draw by inverting the CDF at a uniform point.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let mut r: f64 = rng.random();
    while r == 0.0 {
        r = rng.random();
    }
    let u = r - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// `x + Laplace(0, Δ₁/ε)`; ε-DP for a statistic with ℓ1 sensitivity Δ₁.
pub fn laplace_sanitize<R: Rng + ?Sized>(
    x: f64,
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    check_sensitivity(sensitivity)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return invalid(format!("epsilon must be finite and > 0, got {epsilon}"));
    }
    let noise = laplace_noise(sensitivity / epsilon, rng);
    Ok(if sensitivity == 0.0 { x } else { x + noise })
}

/// Standard deviation of the zCDP Gaussian mechanism: `Δ₂ / sqrt(2ρ)`.
pub fn gaussian_sigma(sensitivity: f64, rho: f64) -> f64 {
    sensitivity / (2.0 * rho).sqrt()
}

/// `x + N(0, σ²)` with `σ = Δ₂/sqrt(2ρ)`; ρ-zCDP for ℓ2 sensitivity Δ₂.
pub fn gaussian_sanitize<R: Rng + ?Sized>(
    x: f64,
    sensitivity: f64,
    rho: f64,
    rng: &mut R,
) -> Result<f64> {
    check_sensitivity(sensitivity)?;
    if !(rho.is_finite() && rho > 0.0) {
        return invalid(format!("rho must be finite and > 0, got {rho}"));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(if sensitivity == 0.0 {
        x
    } else {
        x + gaussian_sigma(sensitivity, rho) * z
    })
}

/// A-priori bounds `[L, U]` on the partition-level difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GlobalBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return invalid(format!("global bounds need L < U, got [{lower}, {upper}]"));
        }
        Ok(Self { lower, upper })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.lower, self.upper).map(|_| ())
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// A sensitivity paired with the budget that pays for one release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismSpec {
    pub sensitivity: f64,
    pub budget: PrivacyBudget,
}

impl MechanismSpec {
    pub fn new(sensitivity: f64, budget: PrivacyBudget) -> Result<Self> {
        check_sensitivity(sensitivity)?;
        budget.require_positive()?;
        Ok(Self { sensitivity, budget })
    }

    /// Laplace for pure-DP budgets, Gaussian for zCDP budgets.
    pub fn sanitize<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        match self.budget.flavor {
            Flavor::PureDp => laplace_sanitize(x, self.sensitivity, self.budget.value, rng),
            Flavor::Zcdp => gaussian_sanitize(x, self.sensitivity, self.budget.value, rng),
        }
    }

    /// Standard deviation of the added noise.
    pub fn noise_sd(&self) -> f64 {
        match self.budget.flavor {
            Flavor::PureDp => std::f64::consts::SQRT_2 * self.sensitivity / self.budget.value,
            Flavor::Zcdp => gaussian_sigma(self.sensitivity, self.budget.value),
        }
    }
}

/// An exact fraction of some parent budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Share {
    pub const ZERO: Share = Share { num: 0, den: 1 };
    pub const ONE: Share = Share { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "share denominator must be positive");
        let g = gcd(num, den).max(1);
        Share {
            num: num / g,
            den: den / g,
        }
    }

    pub fn add(self, other: Share) -> Share {
        let g = gcd(self.den, other.den);
        let den = self.den / g * other.den;
        Share::new(self.num * (den / self.den) + other.num * (den / other.den), den)
    }

    pub fn mul(self, other: Share) -> Share {
        let a = Share::new(self.num, other.den);
        let b = Share::new(other.num, self.den);
        Share::new(a.num * b.num, a.den * b.den)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub share: Share,
    pub budget: PrivacyBudget,
}

/// Records every release against a declared total.
///
/// Charges are kept as exact fractions of the total so the audit
/// `spent == total` is an equality of rationals, not of rounded floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total: PrivacyBudget,
    pub entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(total: PrivacyBudget) -> Self {
        Self {
            total,
            entries: Vec::new(),
        }
    }

    /// Charges `share` of the total and returns the budget it buys.
    pub fn charge(&mut self, label: impl Into<String>, share: Share) -> Result<PrivacyBudget> {
        let spent = self.spent_share().add(share);
        if spent.num > spent.den {
            return invalid(format!(
                "charging {share} would exceed the declared budget ({spent} of total)"
            ));
        }
        let budget = PrivacyBudget {
            flavor: self.total.flavor,
            value: self.total.value * share.as_f64(),
        };
        self.entries.push(LedgerEntry {
            label: label.into(),
            share,
            budget,
        });
        Ok(budget)
    }

    /// Merges a sub-ledger whose total was `share` of this ledger's total.
    pub fn absorb(&mut self, prefix: &str, share: Share, sub: &BudgetLedger) -> Result<()> {
        if sub.total.flavor != self.total.flavor {
            return invalid("cannot absorb a ledger of a different flavor");
        }
        for e in &sub.entries {
            let s = share.mul(e.share);
            let spent = self.spent_share().add(s);
            if spent.num > spent.den {
                return invalid("absorbing the sub-ledger would exceed the declared budget");
            }
            self.entries.push(LedgerEntry {
                label: format!("{prefix}{}", e.label),
                share: s,
                budget: e.budget,
            });
        }
        Ok(())
    }

    pub fn spent_share(&self) -> Share {
        self.entries
            .iter()
            .fold(Share::ZERO, |acc, e| acc.add(e.share))
    }

    /// The composed spend; exactly `total` when the shares sum to one.
    pub fn spent(&self) -> PrivacyBudget {
        let s = self.spent_share();
        let value = if s == Share::ONE {
            self.total.value
        } else {
            self.total.value * s.as_f64()
        };
        PrivacyBudget {
            flavor: self.total.flavor,
            value,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.spent_share() == Share::ONE
    }
}
