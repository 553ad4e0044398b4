//! JSON configuration files and environment overrides.

use std::path::{Path, PathBuf};

use pacdp_core::estimators::{Inference, McmcConfig, Method, MethodSpec, MleOptions};
use pacdp_core::pac::validate_censoring;
use pacdp_core::privacy::{GlobalBounds, PrivacyBudget, Share};
use pacdp_core::sim::ScenarioConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, StageExt};

pub const SEED_VAR: &str = "PACDP_SEED";
pub const THREADS_VAR: &str = "PACDP_THREADS";

/// Where the two groups come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// One column per group; blank cells are skipped so groups may differ in size.
    TwoColumn {
        path: PathBuf,
        #[serde(default = "default_treatment")]
        treatment_column: String,
        #[serde(default = "default_control")]
        control_column: String,
    },
    /// Per-key sums of a value column, randomly split into two halves.
    GroupByCount {
        path: PathBuf,
        key_column: String,
        value_column: String,
        /// Seed of the random split; defaults to the analysis seed.
        #[serde(default)]
        split_seed: Option<u64>,
    },
    /// Values given directly in the config.
    Inline { y1: Vec<f64>, y0: Vec<f64> },
}

fn default_treatment() -> String {
    "y1".into()
}

fn default_control() -> String {
    "y0".into()
}

fn default_inference() -> Inference {
    Inference::Mle
}

fn default_fraction() -> f64 {
    0.1
}

fn default_m() -> usize {
    4
}

fn default_gamma() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub input: InputSpec,
    pub method: Method,
    #[serde(default = "default_inference")]
    pub inference: Inference,
    pub partitions: usize,
    #[serde(default = "default_fraction")]
    pub alpha: f64,
    #[serde(default = "default_fraction")]
    pub beta: f64,
    /// Total budget of the analysis, split evenly over the `m` passes.
    pub budget: PrivacyBudget,
    pub bounds: GlobalBounds,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub mle: MleOptions,
}

impl AnalyzeRequest {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.partitions < 2 {
            return Err(CliError::config(format!("partitions must be at least 2, got {}", self.partitions)));
        }
        validate_censoring(self.alpha, self.beta).config()?;
        if self.m < 2 && self.method != Method::Original {
            return Err(CliError::config(format!("m must be at least 2, got {}", self.m)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CliError::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.method != Method::Original {
            self.budget.require_positive().config()?;
        }
        self.method_spec().map(|_| ())
    }

    pub fn method_spec(&self) -> Result<MethodSpec, CliError> {
        let per_pass = if self.method == Method::Original {
            0.0
        } else {
            self.budget.value * Share::new(1, self.m as u64).as_f64()
        };
        let mut spec = MethodSpec::new(
            self.method,
            self.inference,
            self.alpha,
            self.beta,
            self.bounds,
            PrivacyBudget::new(self.budget.flavor, per_pass).config()?,
        )
        .config()?;
        spec.mcmc = self.mcmc;
        spec.mle = self.mle;
        spec.validate().config()?;
        Ok(spec)
    }

    /// Makes input paths relative to the directory holding the config.
    pub fn resolve_paths(&mut self, base: &Path) {
        let path = match &mut self.input {
            InputSpec::TwoColumn { path, .. } | InputSpec::GroupByCount { path, .. } => path,
            InputSpec::Inline { .. } => return,
        };
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// `PACDP_SEED`, when set, replaces the seed of a config file.
pub fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{SEED_VAR} must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::config(format!("{SEED_VAR}: {e}"))),
    }
}

/// `PACDP_THREADS`: cap on worker threads (`None` = rayon's default).
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::config(format!("{THREADS_VAR}: {e}"))),
    }
}

pub fn load_analyze(path: &Path) -> Result<AnalyzeRequest, CliError> {
    let mut req: AnalyzeRequest = load_json(path)?;
    if let Some(seed) = seed_override()? {
        req.seed = seed;
    }
    req.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    req.validate()?;
    Ok(req)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let mut cfg: ScenarioConfig = load_json(path)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    cfg.validate().config()?;
    Ok(cfg)
}
