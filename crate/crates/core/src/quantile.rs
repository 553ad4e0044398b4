//! Private quantiles through the exponential mechanism over order-statistic gaps.
//!
//! The data are sorted and padded with the global bounds, giving `P + 1` gaps
//! `[z_(j), z_(j+1)]`, `j = 0..=P`. Gap `j` is selected with probability
//! proportional to its length times `exp(−ε·|j − qP|)` and the release is a
//! uniform draw inside the selected gap. Selection runs over the full support
//! `0..=P`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::pac::sample_quantile_sorted;
use crate::privacy::{exp_mech_epsilon, GlobalBounds, PrivacyBudget};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileRequest {
    pub q: f64,
    pub bounds: GlobalBounds,
    pub budget: PrivacyBudget,
}

impl QuantileRequest {
    pub fn new(q: f64, bounds: GlobalBounds, budget: PrivacyBudget) -> Result<Self> {
        let req = Self { q, bounds, budget };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return invalid(format!("quantile proportion must lie in (0, 1), got {}", self.q));
        }
        self.bounds.validate()?;
        self.budget.validate()
    }
}

fn check_sorted_in_bounds(z: &[f64], bounds: &GlobalBounds) -> Result<()> {
    if z.is_empty() {
        return invalid("quantile input is empty");
    }
    if z.iter().any(|x| !bounds.contains(*x)) {
        return invalid(format!(
            "quantile input has values outside [{}, {}]",
            bounds.lower, bounds.upper
        ));
    }
    if z.windows(2).any(|w| !(w[0] <= w[1])) {
        return invalid("quantile input must be sorted ascending");
    }
    Ok(())
}

/// `ln` of the selection weights; zero-length gaps map to `−∞`.
pub fn log_selection_weights(
    z: &[f64],
    q: f64,
    epsilon: f64,
    bounds: &GlobalBounds,
) -> Result<Vec<f64>> {
    check_sorted_in_bounds(z, bounds)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return invalid(format!("epsilon must be finite and >= 0, got {epsilon}"));
    }
    let p = z.len();
    let target = q * p as f64;
    let point = |j: usize| match j {
        0 => bounds.lower,
        j if j == p + 1 => bounds.upper,
        j => z[j - 1],
    };
    Ok((0..=p)
        .map(|j| {
            let gap = point(j + 1) - point(j);
            if gap > 0.0 {
                gap.ln() - epsilon * (j as f64 - target).abs()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect())
}

/// Weights `(z_(j+1) − z_(j))·exp(−ε·|j − qP|)` for `j = 0..=P`, with
/// `z_(0) = L` and `z_(P+1) = U`.
pub fn selection_weights(
    z: &[f64],
    q: f64,
    epsilon: f64,
    bounds: &GlobalBounds,
) -> Result<Vec<f64>> {
    Ok(log_selection_weights(z, q, epsilon, bounds)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Normalized selection probabilities, via log-sum-exp. `None` when every
/// weight is zero.
pub fn selection_probabilities(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / total).collect())
}

/// Exponential-mechanism quantile of `z` at proportion `req.q`.
///
/// Values outside the global bounds are clamped before use. A ρ-zCDP budget
/// is converted with [`exp_mech_epsilon`].
pub fn private_quantile<R: Rng + ?Sized>(z: &[f64], req: &QuantileRequest, rng: &mut R) -> Result<f64> {
    req.validate()?;
    if z.is_empty() {
        return invalid("private_quantile needs at least one value");
    }
    if z.iter().any(|x| x.is_nan()) {
        return invalid("private_quantile input contains NaN");
    }
    let epsilon = exp_mech_epsilon(req.budget)?;
    let bounds = &req.bounds;
    let mut sorted: Vec<f64> = z.iter().map(|&x| bounds.clamp(x)).collect();
    sorted.sort_by(f64::total_cmp);

    let log_w = log_selection_weights(&sorted, req.q, epsilon, bounds)?;
    let probs = match selection_probabilities(&log_w) {
        Some(p) => p,
        None => {
            // All gaps empty: only possible if L == U, which bounds forbid, but
            // keep a defined answer for the degenerate path.
            let x = sample_quantile_sorted(&sorted, req.q)?;
            return Ok(x.clamp(bounds.lower, bounds.upper));
        }
    };

    let j = sample_index(&probs, rng);
    let lo = if j == 0 { bounds.lower } else { sorted[j - 1] };
    let hi = if j == sorted.len() { bounds.upper } else { sorted[j] };
    let u: f64 = rng.random();
    let x = lo + u * (hi - lo);
    if !x.is_finite() {
        return Err(Error::DegenerateInput("private quantile is not finite".into()));
    }
    Ok(x.clamp(lo, hi))
}

/// Categorical draw by inverse CDF over `probs` (assumed to sum to one).
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
        }
        acc += p;
        if u < acc && p > 0.0 {
            return j;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn bounds(l: f64, u: f64) -> GlobalBounds {
        GlobalBounds::new(l, u).unwrap()
    }

    #[test]
    fn weights_hand_example() {
        let eps = 0.7;
        let w = selection_weights(&[1.0, 2.0, 4.0], 0.5, eps, &bounds(0.0, 10.0)).unwrap();
        let expect = [
            (-1.5 * eps).exp(),
            (-0.5 * eps).exp(),
            2.0 * (-0.5 * eps).exp(),
            6.0 * (-1.5 * eps).exp(),
        ];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_epsilon_gives_gap_lengths() {
        let w = selection_weights(&[1.0, 2.0, 4.0], 0.3, 0.0, &bounds(0.0, 10.0)).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 2.0, 6.0]);
    }

    #[test]
    fn repeated_values_have_zero_weight() {
        let w = selection_weights(&[1.0, 2.0, 2.0, 4.0], 0.5, 1.0, &bounds(0.0, 10.0)).unwrap();
        assert_eq!(w[2], 0.0);
        assert!(w.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn weight_input_errors() {
        let b = bounds(0.0, 10.0);
        assert!(selection_weights(&[2.0, 1.0], 0.5, 1.0, &b).is_err());
        assert!(selection_weights(&[2.0, 11.0], 0.5, 1.0, &b).is_err());
        assert!(selection_weights(&[], 0.5, 1.0, &b).is_err());
    }

    #[test]
    fn private_quantile_errors() {
        let mut rng = stream(0, &[]);
        let req = QuantileRequest::new(0.5, bounds(0.0, 1.0), PrivacyBudget::pure(1.0).unwrap()).unwrap();
        assert!(private_quantile(&[], &req, &mut rng).is_err());
        let zero = QuantileRequest { budget: PrivacyBudget::pure(0.0).unwrap(), ..req };
        assert!(private_quantile(&[0.5], &zero, &mut rng).is_err());
        assert!(QuantileRequest::new(1.0, bounds(0.0, 1.0), PrivacyBudget::pure(1.0).unwrap()).is_err());
    }

    #[test]
    fn output_stays_within_bounds() {
        let mut rng = stream(1, &[]);
        let b = bounds(-3.0, 5.0);
        let z = [-10.0, -1.0, 0.0, 0.5, 2.0, 40.0];
        for i in 0..10_000 {
            let q = 0.05 + 0.9 * (i % 10) as f64 / 10.0;
            let req = QuantileRequest::new(q, b, PrivacyBudget::pure(0.3).unwrap()).unwrap();
            let x = private_quantile(&z, &req, &mut rng).unwrap();
            assert!(b.contains(x), "{x}");
        }
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        let mut rng = stream(2, &[]);
        for _ in 0..1000 {
            let j = sample_index(&[0.0, 0.5, 0.0, 0.5, 0.0], &mut rng);
            assert!(j == 1 || j == 3);
        }
    }

    #[test]
    fn concentrates_at_high_epsilon() {
        let mut rng = stream(3, &[]);
        let mut z: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        z.sort_by(f64::total_cmp);
        let b = bounds(-10.0, 10.0);
        let k = 100; // ⌈0.1·1000⌉, 1-indexed
        let target = z[k - 1];
        let window = z[k + 1] - z[k - 3];

        // Exact probability of landing in gaps k-3..=k+1 (all inside the window).
        let log_w = log_selection_weights(&z, 0.1, 50.0, &b).unwrap();
        let probs = selection_probabilities(&log_w).unwrap();
        let inside: f64 = probs[k - 2..=k].iter().sum();
        assert!(inside > 0.99, "exact window mass {inside}");

        let req = QuantileRequest::new(0.1, b, PrivacyBudget::pure(50.0).unwrap()).unwrap();
        let hits = (0..1000)
            .filter(|_| (private_quantile(&z, &req, &mut rng).unwrap() - target).abs() <= window)
            .count();
        assert!(hits >= 990, "{hits}");
    }

    #[test]
    fn zcdp_budget_uses_converted_epsilon() {
        // ρ = 0.125 converts to ε = 1, so both budgets must give identical draws.
        let z = [0.1, 0.4, 0.45, 0.8];
        let b = bounds(0.0, 1.0);
        let pure = QuantileRequest::new(0.5, b, PrivacyBudget::pure(1.0).unwrap()).unwrap();
        let zcdp = QuantileRequest::new(0.5, b, PrivacyBudget::zcdp(0.125).unwrap()).unwrap();
        for s in 0..20 {
            let a = private_quantile(&z, &pure, &mut stream(s, &[])).unwrap();
            let c = private_quantile(&z, &zcdp, &mut stream(s, &[])).unwrap();
            assert_eq!(a, c);
        }
    }
}
