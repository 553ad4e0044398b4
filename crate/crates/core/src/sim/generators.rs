//! Raw-data generators: Gaussian, zero-inflated log-normal and zero-inflated
//! negative binomial.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};

use crate::error::{invalid, Result};

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("probability must lie in [0, 1], got {p}"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

pub fn gen_gaussian<R: Rng + ?Sized>(n: usize, mu: f64, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_positive("sigma", sigma)?;
    if !mu.is_finite() {
        return invalid(format!("mu must be finite, got {mu}"));
    }
    let d = Normal::new(mu, sigma).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    Ok((0..n).map(|_| d.sample(rng)).collect())
}

/// `Bernoulli(p) × LogNormal(μ, σ²)`.
pub fn gen_ziln<R: Rng + ?Sized>(n: usize, p: f64, mu: f64, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_prob(p)?;
    check_positive("sigma", sigma)?;
    let d = LogNormal::new(mu, sigma).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    Ok((0..n)
        .map(|_| if rng.random::<f64>() < p { d.sample(rng) } else { 0.0 })
        .collect())
}

/// `Bernoulli(p) × NB(mean μ, variance μ + μ²/τ)`, drawn as a gamma–Poisson
/// mixture.
pub fn gen_zinb<R: Rng + ?Sized>(n: usize, p: f64, mu: f64, tau: f64, rng: &mut R) -> Result<Vec<u64>> {
    check_prob(p)?;
    check_positive("mu", mu)?;
    check_positive("tau", tau)?;
    let rate = Gamma::new(tau, mu / tau).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            if rng.random::<f64>() >= p {
                return 0;
            }
            let lambda: f64 = rate.sample(rng);
            if lambda > 0.0 {
                let k: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                k as u64
            } else {
                0
            }
        })
        .collect())
}

/// Population mean of the zero-inflated log-normal.
pub fn ziln_mean(p: f64, mu: f64, sigma: f64) -> f64 {
    p * (mu + 0.5 * sigma * sigma).exp()
}

pub fn zinb_mean(p: f64, mu: f64) -> f64 {
    p * mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn gaussian_moments() {
        let x = gen_gaussian(1_000_000, 3.32, 6.0, &mut stream(80, &[])).unwrap();
        let (m, v) = mean_var(&x);
        assert!((m - 3.32).abs() < 4.0 * 6.0 / 1000.0, "{m}");
        assert!((v / 36.0 - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn gaussian_tiny_sigma_is_constant() {
        let x = gen_gaussian(100, 2.5, 1e-300, &mut stream(81, &[])).unwrap();
        assert!(x.iter().all(|v| *v == 2.5));
        assert!(gen_gaussian(10, 0.0, 0.0, &mut stream(81, &[])).is_err());
        assert!(gen_gaussian(10, 0.0, -1.0, &mut stream(81, &[])).is_err());
    }

    #[test]
    fn ziln_moments_and_edges() {
        assert!(gen_ziln(1000, 0.0, 4.6, 1.0, &mut stream(82, &[])).unwrap().iter().all(|v| *v == 0.0));
        assert!(gen_ziln(10, 1.5, 4.6, 1.0, &mut stream(82, &[])).is_err());
        let x = gen_ziln(1_000_000, 0.02, 4.6, 1.0, &mut stream(83, &[])).unwrap();
        let (m, _) = mean_var(&x);
        assert!((m / ziln_mean(0.02, 4.6, 1.0) - 1.0).abs() < 0.05, "{m}");
        assert!(x.iter().all(|v| *v >= 0.0));
        let diff = ziln_mean(0.03, 4.6, 1.0) - ziln_mean(0.02, 4.6, 1.0);
        assert!((diff - 1.64).abs() < 5e-3, "{diff}");
    }

    #[test]
    fn zinb_moments_and_edges() {
        assert!((zinb_mean(0.03, 3.0) - zinb_mean(0.02, 3.0) - 0.03).abs() < 1e-15);
        let x: Vec<f64> = gen_zinb(1_000_000, 1.0, 3.0, 2.0, &mut stream(84, &[]))
            .unwrap()
            .into_iter()
            .map(|k| k as f64)
            .collect();
        let (m, v) = mean_var(&x);
        assert!((m / 3.0 - 1.0).abs() < 0.01, "{m}");
        assert!((v / 7.5 - 1.0).abs() < 0.03, "{v}");

        let x: Vec<f64> = gen_zinb(1_000_000, 1.0, 3.0, 1e6, &mut stream(85, &[]))
            .unwrap()
            .into_iter()
            .map(|k| k as f64)
            .collect();
        let (m, v) = mean_var(&x);
        assert!((v / m - 1.0).abs() < 0.05, "{}", v / m);

        assert!(gen_zinb(10, 0.5, 0.0, 1.0, &mut stream(86, &[])).is_err());
        assert!(gen_zinb(10, 0.5, 1.0, -1.0, &mut stream(86, &[])).is_err());
    }
}
