//! Partitioning, differencing and censoring.
//!
//! Both groups are shuffled independently, cut into `P` equal blocks and the
//! block means differenced pairwise by index, giving the partition-level
//! differences `z_j`. These are then censored at `(l, u)`: values `≤ l` become
//! `(l, −1)`, values `≥ u` become `(u, +1)`, everything else is kept as `(z_j, 0)`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ceil_count;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub partitions: usize,
    pub n1: usize,
    pub n0: usize,
}

impl PartitionConfig {
    pub fn new(partitions: usize, n1: usize, n0: usize) -> Result<Self> {
        let cfg = Self { partitions, n1, n0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.partitions;
        if p == 0 {
            return invalid("number of partitions must be positive");
        }
        if p > self.n1.min(self.n0) {
            return invalid(format!(
                "{p} partitions exceed the smaller group size {}",
                self.n1.min(self.n0)
            ));
        }
        if self.n1 % p != 0 || self.n0 % p != 0 {
            return invalid(format!(
                "group sizes ({}, {}) must be divisible by {p} partitions; trim first",
                self.n1, self.n0
            ));
        }
        Ok(())
    }
}

/// Partition-level mean differences `z_j = ȳ_{j1} − ȳ_{j0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDifferences {
    pub z: Vec<f64>,
}

impl PartitionDifferences {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return invalid("partition differences are empty");
        }
        if z.iter().any(|x| !x.is_finite()) {
            return invalid("partition differences must be finite");
        }
        Ok(Self { z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.z.iter().sum::<f64>() / self.z.len() as f64
    }
}

/// Drops a uniformly random remainder so `len % partitions == 0`.
pub fn trim_to_divisible<R: Rng + ?Sized>(y: &[f64], partitions: usize, rng: &mut R) -> Result<Vec<f64>> {
    if partitions == 0 {
        return invalid("number of partitions must be positive");
    }
    let keep = y.len() - y.len() % partitions;
    if keep == y.len() {
        return Ok(y.to_vec());
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.shuffle(rng);
    let mut kept: Vec<usize> = idx[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| y[i]).collect())
}

fn block_means(y: &[f64], partitions: usize) -> Vec<f64> {
    let size = y.len() / partitions;
    y.chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect()
}

/// Differences of block means for already-ordered groups (no shuffling).
pub fn block_differences(y1: &[f64], y0: &[f64], partitions: usize) -> Result<PartitionDifferences> {
    PartitionConfig::new(partitions, y1.len(), y0.len())?;
    let m1 = block_means(y1, partitions);
    let m0 = block_means(y0, partitions);
    PartitionDifferences::new(m1.iter().zip(&m0).map(|(a, b)| a - b).collect())
}

/// Shuffles each group (Fisher–Yates), splits into `P` equal blocks and
/// differences the block means pairwise.
pub fn partition_and_difference<R: Rng + ?Sized>(
    y1: &[f64],
    y0: &[f64],
    partitions: usize,
    rng: &mut R,
) -> Result<PartitionDifferences> {
    PartitionConfig::new(partitions, y1.len(), y0.len())?;
    let mut a = y1.to_vec();
    let mut b = y0.to_vec();
    a.shuffle(rng);
    b.shuffle(rng);
    block_differences(&a, &b, partitions)
}

/// Order statistic `z_(⌈qP⌉)` of an ascending slice.
pub fn sample_quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return invalid("sample quantile of an empty vector");
    }
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("quantile proportion must lie in (0, 1), got {q}"));
    }
    let rank = (ceil_count(q * sorted.len() as f64) as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Order statistic `z_(⌈qP⌉)` (1-indexed).
pub fn sample_quantile(z: &[f64], q: f64) -> Result<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    sample_quantile_sorted(&sorted, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Censor {
    Left,
    None,
    Right,
}

impl Censor {
    pub fn code(self) -> i8 {
        match self {
            Censor::Left => -1,
            Censor::None => 0,
            Censor::Right => 1,
        }
    }
}

/// Censored partition-level data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PACData {
    pub l: f64,
    pub u: f64,
    pub zc: Vec<(f64, Censor)>,
    pub alpha: f64,
    pub beta: f64,
    pub p_l: usize,
    pub p_u: usize,
}

/// Checks `0 < α, β < 1`, `α + β < 1` and `5α/4 + β < 1`.
pub fn validate_censoring(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return invalid(format!("censoring proportions must lie in (0, 1), got ({alpha}, {beta})"));
    }
    if alpha + beta >= 1.0 || 1.25 * alpha + beta >= 1.0 {
        return invalid(format!(
            "censoring proportions ({alpha}, {beta}) must satisfy 5α/4 + β < 1"
        ));
    }
    Ok(())
}

impl PACData {
    pub fn p(&self) -> usize {
        self.zc.len()
    }

    /// Number of uncensored elements.
    pub fn p_c(&self) -> usize {
        self.p() - self.p_l - self.p_u
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.zc.iter().map(|(v, _)| *v)
    }

    /// Re-derives counts and checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        validate_censoring(self.alpha, self.beta)?;
        if !(self.l < self.u) {
            return invalid(format!("censoring bounds need l < u, got ({}, {})", self.l, self.u));
        }
        let mut p_l = 0;
        let mut p_u = 0;
        for &(v, c) in &self.zc {
            let ok = match c {
                Censor::Left => {
                    p_l += 1;
                    v == self.l
                }
                Censor::Right => {
                    p_u += 1;
                    v == self.u
                }
                Censor::None => v > self.l && v < self.u,
            };
            if !ok {
                return invalid(format!("pair ({v}, {}) violates the censoring rule", c.code()));
            }
        }
        if p_l != self.p_l || p_u != self.p_u {
            return invalid("censoring counts disagree with the censor codes");
        }
        Ok(())
    }
}

/// Censors `z` at `(l, u)` with weak inequalities at both thresholds.
pub fn censor(z: &PartitionDifferences, l: f64, u: f64, alpha: f64, beta: f64) -> Result<PACData> {
    if !(l < u) {
        return invalid(format!("censoring bounds need l < u, got ({l}, {u})"));
    }
    validate_censoring(alpha, beta)?;
    let mut p_l = 0;
    let mut p_u = 0;
    let zc = z
        .z
        .iter()
        .map(|&x| {
            if x <= l {
                p_l += 1;
                (l, Censor::Left)
            } else if x >= u {
                p_u += 1;
                (u, Censor::Right)
            } else {
                (x, Censor::None)
            }
        })
        .collect();
    Ok(PACData {
        l,
        u,
        zc,
        alpha,
        beta,
        p_l,
        p_u,
    })
}

/// Censors at the sample quantiles `z_(⌈αP⌉)` and `z_(⌈(1−β)P⌉)`.
pub fn censor_at_sample_quantiles(z: &PartitionDifferences, alpha: f64, beta: f64) -> Result<PACData> {
    validate_censoring(alpha, beta)?;
    let mut sorted = z.z.clone();
    sorted.sort_by(f64::total_cmp);
    let l = sample_quantile_sorted(&sorted, alpha)?;
    let u = sample_quantile_sorted(&sorted, 1.0 - beta)?;
    censor(z, l, u, alpha, beta)
}

/// Re-censors raw differences at sanitized bounds (the doubling-down variants).
pub fn recompute_with_sanitized_bounds(
    z: &PartitionDifferences,
    l_star: f64,
    u_star: f64,
    alpha: f64,
    beta: f64,
) -> Result<PACData> {
    censor(z, l_star, u_star, alpha, beta)
}

/// Sufficient statistics of uncensored partition differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnoCStats {
    pub s1: f64,
    pub s2: f64,
    pub p: usize,
}

impl PnoCStats {
    pub fn from_differences(z: &PartitionDifferences) -> Self {
        Self {
            s1: z.z.iter().sum(),
            s2: z.z.iter().map(|x| x * x).sum(),
            p: z.len(),
        }
    }
}

/// Sums over the uncensored elements, plus the censoring bounds and counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PACStats {
    pub s1: f64,
    pub s2: f64,
    pub l: f64,
    pub u: f64,
    pub p_l: usize,
    pub p_u: usize,
    pub p: usize,
}

pub fn pac_summaries(d: &PACData) -> PACStats {
    let (s1, s2) = d
        .zc
        .iter()
        .filter(|(_, c)| *c == Censor::None)
        .fold((0.0, 0.0), |(a, b), (v, _)| (a + v, b + v * v));
    PACStats {
        s1,
        s2,
        l: d.l,
        u: d.u,
        p_l: d.p_l,
        p_u: d.p_u,
        p: d.p(),
    }
}
