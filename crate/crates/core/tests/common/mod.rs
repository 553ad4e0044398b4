#![allow(dead_code)]

use pacdp_core::estimators::{nonprivate_censored_stats, CensoredStats};
use pacdp_core::pac::{censor, PACData, PartitionDifferences};
use pacdp_core::rng::{stream, PacRng};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn normal_z(rng: &mut PacRng, p: usize, mean: f64, sd: f64) -> PartitionDifferences {
    let d = Normal::new(mean, sd).unwrap();
    PartitionDifferences::new((0..p).map(|_| d.sample(rng)).collect()).unwrap()
}

/// Censored statistics from a normal sample with random location, scale,
/// partition count and censoring fractions.
pub fn random_stats(seed: u64, k: u64) -> CensoredStats {
    let mut rng = stream(seed, &[k]);
    let p = rng.random_range(30..400);
    let mean = rng.random_range(-3.0..3.0);
    let sd = rng.random_range(0.2..4.0);
    let alpha = rng.random_range(0.02..0.25);
    let beta = rng.random_range(0.02..0.25);
    let z = normal_z(&mut rng, p, mean, sd);
    nonprivate_censored_stats(&z, alpha, beta).unwrap()
}

/// Symmetrically censored data at arbitrary (not necessarily quantile) bounds.
pub fn random_pac_data(seed: u64, k: u64) -> PACData {
    let mut rng = stream(seed, &[k]);
    let p = rng.random_range(10..300);
    let a = rng.random_range(0.02..0.3);
    let (mean, sd) = (rng.random_range(-5.0..5.0), rng.random_range(0.1..10.0));
    let z = normal_z(&mut rng, p, mean, sd);
    let mut sorted = z.z.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[rng.random_range(0..p / 3)];
    let hi = sorted[rng.random_range(2 * p / 3..p)];
    censor(&z, lo, hi, a, a).unwrap()
}
