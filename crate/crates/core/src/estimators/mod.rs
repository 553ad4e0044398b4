//! Per-pass estimators: the uncensored 2S baseline, the censored-likelihood
//! family (4S, 4SDD, 6S, 6SDD), winsorized and trimmed means, and the naïve
//! negative control.

mod likelihood;
mod mcmc;
mod mle;
mod pipeline;
mod robust;

use serde::{Deserialize, Serialize};

use crate::ceil_count;
use crate::error::{invalid, Error, Result};
use crate::pac::validate_censoring;
use crate::privacy::{GlobalBounds, PrivacyBudget};

pub use likelihood::{
    censored_loglik, censored_loglik_d2theta, censored_loglik_dtheta, CensoredStats, LikelihoodState,
};
pub use mcmc::{posterior_mh, McmcConfig, PosteriorSummary};
pub use mle::{fit_censored_mle, MleFit, MleOptions};
pub use pipeline::{
    estimate_2s, estimate_from_stats, estimate_pac, estimate_pac_given_bounds, mle_censored,
    nonprivate_censored_stats, posterior_estimate, PassOutcome,
};
pub use robust::{
    naive_sanitized, trimmed_sanitized, trimmed_stats, trimmed_variance_ratio, winsorized_sanitized,
    winsorized_stats,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Non-private reference: the 2S formulas without noise.
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "2s")]
    TwoS,
    #[serde(rename = "4s")]
    FourS,
    #[serde(rename = "4sdd")]
    FourSDD,
    #[serde(rename = "6s")]
    SixS,
    #[serde(rename = "6sdd")]
    SixSDD,
    #[serde(rename = "winsorized")]
    Winsorized,
    #[serde(rename = "trimmed")]
    Trimmed,
    #[serde(rename = "naive")]
    Naive,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Original,
        Method::TwoS,
        Method::FourS,
        Method::FourSDD,
        Method::SixS,
        Method::SixSDD,
        Method::Winsorized,
        Method::Trimmed,
        Method::Naive,
    ];

    /// Number of sanitized statistics per pass; the pass budget is split evenly.
    pub fn stat_count(self) -> u64 {
        match self {
            Method::Original => 0,
            Method::TwoS => 2,
            Method::SixS | Method::SixSDD => 6,
            _ => 4,
        }
    }

    pub fn is_private(self) -> bool {
        self != Method::Original
    }

    /// Uses the censored likelihood (and hence MLE or Bayes inference).
    pub fn is_likelihood(self) -> bool {
        matches!(self, Method::FourS | Method::FourSDD | Method::SixS | Method::SixSDD)
    }

    pub fn is_censored(self) -> bool {
        !matches!(self, Method::Original | Method::TwoS)
    }

    /// Recomputes downstream statistics at the sanitized bounds.
    pub fn doubles_down(self) -> bool {
        matches!(self, Method::FourSDD | Method::SixSDD)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::TwoS => "2s",
            Method::FourS => "4s",
            Method::FourSDD => "4sdd",
            Method::SixS => "6s",
            Method::SixSDD => "6sdd",
            Method::Winsorized => "winsorized",
            Method::Trimmed => "trimmed",
            Method::Naive => "naive",
        }
    }

    /// How inference is actually produced: `mle`/`bayes` for likelihood
    /// methods, `exact` for the non-private reference, `closed_form` otherwise.
    pub fn inference_label(self, inference: Inference) -> &'static str {
        match (self.is_likelihood(), self, inference) {
            (true, _, Inference::Mle) => "mle",
            (true, _, Inference::Bayes) => "bayes",
            (false, Method::Original, _) => "exact",
            _ => "closed_form",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.label() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inference {
    Mle,
    Bayes,
}

impl std::fmt::Display for Inference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Inference::Mle => "mle",
            Inference::Bayes => "bayes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// Only consulted by likelihood methods.
    pub inference: Inference,
    pub alpha: f64,
    pub beta: f64,
    pub bounds: GlobalBounds,
    pub budget_per_pass: PrivacyBudget,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub mle: MleOptions,
}

impl MethodSpec {
    pub fn new(
        method: Method,
        inference: Inference,
        alpha: f64,
        beta: f64,
        bounds: GlobalBounds,
        budget_per_pass: PrivacyBudget,
    ) -> Result<Self> {
        let spec = Self {
            method,
            inference,
            alpha,
            beta,
            bounds,
            budget_per_pass,
            mcmc: McmcConfig::default(),
            mle: MleOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.budget_per_pass.validate()?;
        if self.method.is_private() {
            self.budget_per_pass.require_positive()?;
        }
        if self.method.is_censored() {
            validate_censoring(self.alpha, self.beta)?;
        }
        if matches!(self.method, Method::Winsorized | Method::Trimmed) && self.alpha != self.beta {
            return invalid(format!(
                "{} requires alpha == beta, got ({}, {})",
                self.method, self.alpha, self.beta
            ));
        }
        if self.method.is_likelihood() {
            match self.inference {
                Inference::Mle => self.mle.validate()?,
                Inference::Bayes => self.mcmc.validate()?,
            }
        }
        Ok(())
    }

    /// The inference actually applied (closed-form methods have none).
    pub fn effective_inference(&self) -> Option<Inference> {
        self.method.is_likelihood().then_some(self.inference)
    }
}

/// Notes attached to one pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub notes: Vec<String>,
    /// `ŵ*` was raised to the variance floor.
    pub variance_floored: bool,
    /// Partition differences clamped into the global bounds (2S only).
    pub clamped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_se: Option<f64>,
}

/// One pass's point estimate and its within-pass variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theta: f64,
    pub w: f64,
    pub diagnostics: Diagnostics,
}

impl PointEstimate {
    pub fn new(theta: f64, w: f64) -> Self {
        Self {
            theta,
            w,
            diagnostics: Diagnostics::default(),
        }
    }

    /// Raises a nonpositive (or NaN) variance to `10⁻¹²·max(1, θ²)`.
    pub(crate) fn floored(theta: f64, w: f64, mut diagnostics: Diagnostics) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::DegenerateInput(format!("estimate is not finite: {theta}")));
        }
        let floor = 1e-12 * theta.abs().powi(2).max(1.0);
        let w = if w > floor && w.is_finite() {
            w
        } else if w == f64::INFINITY {
            return Err(Error::DegenerateInput("estimated variance is infinite".into()));
        } else {
            diagnostics.variance_floored = true;
            diagnostics.notes.push(format!("variance {w:e} raised to floor {floor:e}"));
            floor
        };
        Ok(Self { theta, w, diagnostics })
    }
}

/// Sanitized statistics of one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SanitizedStats {
    TwoS {
        s1: f64,
        s2: f64,
        p: f64,
    },
    /// Censored counts are replaced by `⌈Pα⌉` and `⌈Pβ⌉` in the likelihood.
    FourS {
        l: f64,
        u: f64,
        s1: f64,
        s2: f64,
        p: f64,
        alpha: f64,
        beta: f64,
    },
    SixS {
        l: f64,
        u: f64,
        s1: f64,
        s2: f64,
        p_l: f64,
        p_u: f64,
        p: f64,
    },
}

/// Orders `(l, u)` and separates equal bounds by `10⁻⁶` of the global width.
pub(crate) fn repair_bounds(l: f64, u: f64, global_width: f64, notes: &mut Vec<String>) -> (f64, f64) {
    let (mut l, mut u) = (l, u);
    if u < l {
        notes.push(format!("sanitized bounds swapped: ({l}, {u})"));
        std::mem::swap(&mut l, &mut u);
    }
    if u == l {
        let half = 0.5e-6 * global_width;
        notes.push(format!("sanitized bounds coincide at {l}; widened by {:e}", 2.0 * half));
        l -= half;
        u += half;
    }
    (l, u)
}

impl SanitizedStats {
    /// Makes the statistics usable by the likelihood; returns what was changed.
    ///
    /// Counts are clamped at zero and, if they leave no uncensored mass, scaled
    /// down proportionally to total `P − 1`. Bounds are ordered and, when
    /// equal, separated by `10⁻⁶·global_width`.
    pub fn repair(&mut self, global_width: f64) -> Vec<String> {
        let mut notes = Vec::new();
        match self {
            SanitizedStats::TwoS { .. } => {}
            SanitizedStats::FourS { l, u, .. } => {
                (*l, *u) = repair_bounds(*l, *u, global_width, &mut notes);
            }
            SanitizedStats::SixS { l, u, p_l, p_u, p, .. } => {
                (*l, *u) = repair_bounds(*l, *u, global_width, &mut notes);
                if *p_l < 0.0 || *p_u < 0.0 {
                    notes.push(format!("negative censored counts ({p_l}, {p_u}) clamped to 0"));
                    *p_l = p_l.max(0.0);
                    *p_u = p_u.max(0.0);
                }
                let total = *p_l + *p_u;
                if total >= *p {
                    let k = (*p - 1.0) / total;
                    notes.push(format!("censored counts ({p_l}, {p_u}) rescaled to sum {}", *p - 1.0));
                    *p_l *= k;
                    *p_u *= k;
                }
            }
        }
        notes
    }

    pub fn p(&self) -> f64 {
        match *self {
            SanitizedStats::TwoS { p, .. } | SanitizedStats::FourS { p, .. } | SanitizedStats::SixS { p, .. } => p,
        }
    }

    /// The statistics the censored likelihood consumes.
    pub fn censored(&self) -> Result<CensoredStats> {
        let s = match *self {
            SanitizedStats::TwoS { .. } => {
                return invalid("2S statistics carry no censoring information");
            }
            SanitizedStats::FourS { l, u, s1, s2, p, alpha, beta } => CensoredStats {
                l,
                u,
                s1,
                s2,
                p_l: ceil_count(p * alpha),
                p_u: ceil_count(p * beta),
                p,
            },
            SanitizedStats::SixS { l, u, s1, s2, p_l, p_u, p } => CensoredStats { l, u, s1, s2, p_l, p_u, p },
        };
        if !(s.p_c() > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "censored counts ({}, {}) leave no uncensored partitions out of {}",
                s.p_l, s.p_u, s.p
            )));
        }
        Ok(s)
    }
}
