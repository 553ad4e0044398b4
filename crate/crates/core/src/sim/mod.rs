//! Monte Carlo evaluation of the estimators on simulated two-group data.

mod generators;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{estimate_pac, Inference, McmcConfig, Method, MethodSpec, MleOptions, PointEstimate};
use crate::inference::{combine, CombinedInference};
use crate::pac::{partition_and_difference, validate_censoring, PartitionDifferences};
use crate::privacy::{Flavor, GlobalBounds, PrivacyBudget, Share};
use crate::rng::stream;

pub use generators::{gen_gaussian, gen_ziln, gen_zinb, ziln_mean, zinb_mean};

/// Data-generating model for the two groups (`…1` treatment, `…0` control).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataModel {
    Gaussian { mu0: f64, mu1: f64, sigma: f64 },
    Ziln { p0: f64, p1: f64, mu0: f64, mu1: f64, sigma: f64 },
    Zinb { p0: f64, p1: f64, mu0: f64, mu1: f64, tau0: f64, tau1: f64 },
}

impl DataModel {
    /// Population mean difference implied by the parameters.
    pub fn theta(&self) -> f64 {
        match *self {
            DataModel::Gaussian { mu0, mu1, .. } => mu1 - mu0,
            DataModel::Ziln { p0, p1, mu0, mu1, sigma } => ziln_mean(p1, mu1, sigma) - ziln_mean(p0, mu0, sigma),
            DataModel::Zinb { p0, p1, mu0, mu1, .. } => zinb_mean(p1, mu1) - zinb_mean(p0, mu0),
        }
    }

    /// Default global bounds on partition differences.
    pub fn default_bounds(&self) -> GlobalBounds {
        let b = match self {
            DataModel::Gaussian { .. } => 50.0,
            _ => 100.0,
        };
        GlobalBounds { lower: -b, upper: b }
    }

    /// Draws `n` observations of group 1 and `n` of group 0.
    pub fn generate<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let to_f64 = |v: Vec<u64>| v.into_iter().map(|k| k as f64).collect::<Vec<_>>();
        Ok(match *self {
            DataModel::Gaussian { mu0, mu1, sigma } => {
                (gen_gaussian(n, mu1, sigma, rng)?, gen_gaussian(n, mu0, sigma, rng)?)
            }
            DataModel::Ziln { p0, p1, mu0, mu1, sigma } => {
                (gen_ziln(n, p1, mu1, sigma, rng)?, gen_ziln(n, p0, mu0, sigma, rng)?)
            }
            DataModel::Zinb { p0, p1, mu0, mu1, tau0, tau1 } => (
                to_f64(gen_zinb(n, p1, mu1, tau1, rng)?),
                to_f64(gen_zinb(n, p0, mu0, tau0, rng)?),
            ),
        })
    }
}

/// One estimator under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub method: Method,
    #[serde(default = "default_inference")]
    pub inference: Inference,
}

fn default_inference() -> Inference {
    Inference::Mle
}

fn default_m() -> usize {
    4
}

fn default_gamma() -> f64 {
    0.95
}

fn default_level() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub data: DataModel,
    /// Declared truth; must agree with `data` to 10⁻¹⁰ when given.
    #[serde(default)]
    pub theta_true: Option<f64>,
    /// Observations per group.
    pub n: usize,
    pub partitions: usize,
    pub alpha: f64,
    pub beta: f64,
    pub methods: Vec<MethodEntry>,
    /// Total budget of one analysis; each of the `m` passes gets `1/m` of it.
    pub budgets: Vec<PrivacyBudget>,
    #[serde(default)]
    pub bounds: Option<GlobalBounds>,
    #[serde(default = "default_m")]
    pub m: usize,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Significance level of the test of `θ = 0`.
    #[serde(default = "default_level")]
    pub test_level: f64,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub mle: MleOptions,
}

impl ScenarioConfig {
    pub fn theta(&self) -> f64 {
        self.theta_true.unwrap_or_else(|| self.data.theta())
    }

    pub fn bounds(&self) -> GlobalBounds {
        self.bounds.unwrap_or_else(|| self.data.default_bounds())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta_true {
            let implied = self.data.theta();
            if (t - implied).abs() > 1e-10 {
                return invalid(format!(
                    "theta_true = {t} disagrees with the data model's mean difference {implied}"
                ));
            }
        }
        if self.partitions < 2 {
            return invalid(format!("need at least 2 partitions, got {}", self.partitions));
        }
        if self.n < self.partitions {
            return invalid(format!("n = {} is smaller than P = {}", self.n, self.partitions));
        }
        validate_censoring(self.alpha, self.beta)?;
        if self.m < 2 {
            return invalid(format!("m must be at least 2, got {}", self.m));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) || !(self.test_level > 0.0 && self.test_level < 1.0) {
            return invalid("gamma and test_level must lie in (0, 1)");
        }
        self.bounds().validate()?;
        for b in &self.budgets {
            b.require_positive()?;
        }
        for e in &self.methods {
            // Validate each spec against a representative budget.
            let budget = self.budgets.first().copied().unwrap_or(PrivacyBudget {
                flavor: Flavor::PureDp,
                value: 1.0,
            });
            self.spec(*e, budget)?;
        }
        Ok(())
    }

    fn spec(&self, e: MethodEntry, total: PrivacyBudget) -> Result<MethodSpec> {
        let mut spec = MethodSpec {
            method: e.method,
            inference: e.inference,
            alpha: self.alpha,
            beta: self.beta,
            bounds: self.bounds(),
            budget_per_pass: PrivacyBudget {
                flavor: total.flavor,
                value: total.value * Share::new(1, self.m as u64).as_f64(),
            },
            mcmc: self.mcmc,
            mle: self.mle,
        };
        if e.method == Method::Original {
            spec.budget_per_pass.value = 0.0;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// The (method, budget) cells reported, original first.
    pub fn cells(&self) -> Vec<(MethodEntry, Option<PrivacyBudget>)> {
        let mut cells = vec![(
            MethodEntry {
                method: Method::Original,
                inference: Inference::Mle,
            },
            None,
        )];
        for e in self.methods.iter().filter(|e| e.method != Method::Original) {
            for b in &self.budgets {
                cells.push((*e, Some(*b)));
            }
        }
        cells
    }
}

/// Stream path component identifying a (method, budget) cell independently
/// of its position in the config.
fn cell_key(e: MethodEntry, b: Option<PrivacyBudget>) -> [u64; 4] {
    let method = Method::ALL.iter().position(|m| *m == e.method).unwrap_or(0) as u64;
    let (flavor, value) = match b {
        None => (0, 0),
        Some(b) => (
            match b.flavor {
                Flavor::PureDp => 1,
                Flavor::Zcdp => 2,
            },
            b.value.to_bits(),
        ),
    };
    [method, e.inference as u64, flavor, value]
}

/// Outcome of one (method, budget) cell in one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub inference: Option<CombinedInference>,
    pub error: Option<String>,
}

/// Runs the `m` passes of one cell and pools them.
pub fn run_cell(
    z: &PartitionDifferences,
    cfg: &ScenarioConfig,
    entry: MethodEntry,
    budget: Option<PrivacyBudget>,
    seed_path: &[u64],
) -> Result<CombinedInference> {
    let total = budget.unwrap_or(PrivacyBudget {
        flavor: Flavor::PureDp,
        value: 0.0,
    });
    let spec = cfg.spec(entry, total)?;
    if entry.method == Method::Original {
        // Non-private reference: t_{P−1} interval around the mean difference.
        let mut rng = stream(cfg.seed, seed_path);
        let est = estimate_pac(z, &spec, &mut rng)?.estimate;
        return CombinedInference::from_single(est.theta, est.w, z.len() as f64 - 1.0, cfg.gamma);
    }
    let mut rng = stream(cfg.seed, seed_path);
    let passes: Vec<PointEstimate> = (0..cfg.m)
        .map(|_| estimate_pac(z, &spec, &mut rng).map(|o| o.estimate))
        .collect::<Result<_>>()?;
    combine(&passes, cfg.gamma)
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub inference: String,
    pub flavor: String,
    pub budget: f64,
    pub bias: f64,
    /// Monte-Carlo standard error of `bias`.
    pub bias_se: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub ci_width: f64,
    pub reject_rate: f64,
    pub repeats: usize,
    pub failures: usize,
}

/// Aggregates one cell's outcomes (in repeat order).
pub fn summarize(
    entry: MethodEntry,
    budget: Option<PrivacyBudget>,
    theta: f64,
    test_level: f64,
    outcomes: &[RepeatOutcome],
) -> MetricsRow {
    let ok: Vec<&CombinedInference> = outcomes.iter().filter_map(|o| o.inference.as_ref()).collect();
    let n = ok.len();
    let nf = n as f64;
    let mean = |f: &dyn Fn(&CombinedInference) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            ok.iter().map(|c| f(c)).sum::<f64>() / nf
        }
    };
    let bias = mean(&|c| c.theta - theta);
    let mse = mean(&|c| (c.theta - theta).powi(2));
    let rmse = mse.sqrt().max(bias.abs());
    let bias_se = if n > 1 {
        (ok.iter().map(|c| (c.theta - theta - bias).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt()
    } else {
        f64::NAN
    };
    let inference = entry.method.inference_label(entry.inference).to_string();
    let (flavor, value) = match budget {
        None => ("none".to_string(), 0.0),
        Some(b) => (b.flavor.to_string(), b.value),
    };
    MetricsRow {
        method: entry.method.label().to_string(),
        inference,
        flavor,
        budget: value,
        bias,
        bias_se,
        rmse,
        coverage: mean(&|c| c.covers(theta) as u8 as f64),
        ci_width: mean(&|c| c.ci.1 - c.ci.0),
        reject_rate: mean(&|c| (c.p_value < test_level) as u8 as f64),
        repeats: n,
        failures: outcomes.len() - n,
    }
}

/// All cells for one repeat.
pub fn run_repeat(cfg: &ScenarioConfig, repeat: usize) -> Result<Vec<RepeatOutcome>> {
    let r = repeat as u64;
    let (y1, y0) = cfg.data.generate(cfg.n, &mut stream(cfg.seed, &[0, r]))?;
    let z = partition_and_difference(&y1, &y0, cfg.partitions, &mut stream(cfg.seed, &[1, r]))?;
    Ok(cfg
        .cells()
        .into_iter()
        .map(|(entry, budget)| {
            let key = cell_key(entry, budget);
            let path = [2, r, key[0], key[1], key[2], key[3]];
            match run_cell(&z, cfg, entry, budget, &path) {
                Ok(c) => RepeatOutcome {
                    repeat,
                    inference: Some(c),
                    error: None,
                },
                Err(e) => RepeatOutcome {
                    repeat,
                    inference: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Per-cell outcomes and their summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub rows: Vec<MetricsRow>,
    /// `outcomes[c][r]`: cell `c` (same order as `rows`), repeat `r`.
    pub outcomes: Vec<Vec<RepeatOutcome>>,
}

/// Runs every repeat (in parallel on the current rayon pool) and aggregates.
///
/// Output is independent of the thread count: each repeat draws from its own
/// streams and results are reassembled in repeat order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let per_repeat: Vec<Vec<RepeatOutcome>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, r))
        .collect::<Result<_>>()?;
    let cells = cfg.cells();
    let theta = cfg.theta();
    let mut outcomes = vec![Vec::with_capacity(cfg.repeats); cells.len()];
    for rep in per_repeat {
        for (c, o) in rep.into_iter().enumerate() {
            outcomes[c].push(o);
        }
    }
    let rows = cells
        .iter()
        .zip(&outcomes)
        .map(|((e, b), o)| summarize(*e, *b, theta, cfg.test_level, o))
        .collect();
    Ok(ScenarioResult { rows, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_cfg(repeats: usize) -> ScenarioConfig {
        ScenarioConfig {
            data: DataModel::Gaussian { mu0: 0.0, mu1: 0.0, sigma: 1.0 },
            theta_true: Some(0.0),
            n: 2000,
            partitions: 100,
            alpha: 0.1,
            beta: 0.1,
            methods: vec![
                MethodEntry { method: Method::FourS, inference: Inference::Mle },
                MethodEntry { method: Method::TwoS, inference: Inference::Mle },
            ],
            budgets: vec![PrivacyBudget::pure(2.0).unwrap()],
            bounds: Some(GlobalBounds::new(-5.0, 5.0).unwrap()),
            m: 4,
            repeats,
            seed: 7,
            gamma: 0.95,
            test_level: 0.05,
            mcmc: McmcConfig::default(),
            mle: MleOptions::default(),
        }
    }

    #[test]
    fn zero_repeats_give_empty_metrics() {
        let res = run_scenario(&gaussian_cfg(0)).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert!(res.rows.iter().all(|r| r.repeats == 0 && r.failures == 0));
    }

    #[test]
    fn theta_true_is_checked() {
        let mut cfg = gaussian_cfg(1);
        cfg.theta_true = Some(0.1);
        assert!(run_scenario(&cfg).is_err());
        let cfg = ScenarioConfig {
            data: DataModel::Ziln { p0: 0.02, p1: 0.03, mu0: 4.6, mu1: 4.6, sigma: 1.0 },
            theta_true: Some(0.03 * (5.1f64).exp() - 0.02 * (5.1f64).exp()),
            ..gaussian_cfg(1)
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn deterministic_and_consistent() {
        let cfg = gaussian_cfg(6);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            assert!(row.rmse * row.rmse >= row.bias * row.bias);
            assert!((0.0..=1.0).contains(&row.coverage));
            assert!((0.0..=1.0).contains(&row.reject_rate));
            assert_eq!(row.repeats + row.failures, 6);
        }
    }

    #[test]
    fn adding_a_method_leaves_other_cells_unchanged() {
        let cfg = gaussian_cfg(3);
        let mut more = cfg.clone();
        more.methods.insert(0, MethodEntry { method: Method::Winsorized, inference: Inference::Mle });
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&more).unwrap();
        let find = |res: &ScenarioResult, m: &str| res.rows.iter().find(|r| r.method == m).cloned().unwrap();
        assert_eq!(find(&a, "4s"), find(&b, "4s"));
        assert_eq!(find(&a, "2s"), find(&b, "2s"));
    }
}
