//! Library side of the `pacdp` command: configuration, CSV ingestion,
//! single analyses and simulation output.

pub mod analyze;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

use std::path::Path;

use pacdp_core::privacy::{GlobalBounds, PrivacyBudget};
use pacdp_core::quantile::{private_quantile, QuantileRequest};
use pacdp_core::rng::stream;
use pacdp_core::sim::{run_scenario, ScenarioResult};
use serde::Serialize;

pub use analyze::{analyze, report_json, AnalysisReport, SCHEMA_VERSION};
pub use config::{load_analyze, load_scenario, AnalyzeRequest, InputSpec};
pub use error::CliError;

use error::StageExt;

/// Runs a simulation config; writes tables to `out` when given, otherwise
/// returns the metrics CSV.
pub fn simulate(config: &Path, out: Option<&Path>) -> Result<(ScenarioResult, String), CliError> {
    let cfg = load_scenario(config)?;
    let result = run_scenario(&cfg).stage("simulation")?;
    let mut csv = Vec::new();
    report::write_metrics(&result.rows, &mut csv)?;
    if let Some(dir) = out {
        report::write_run(dir, &cfg, &result)?;
    }
    Ok((result, String::from_utf8(csv).expect("CSV is UTF-8")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileReport {
    pub q: f64,
    pub estimate: f64,
    pub n: usize,
    pub bounds: GlobalBounds,
    pub budget: PrivacyBudget,
    pub seed: u64,
}

pub fn quantile(values: &[f64], q: f64, budget: PrivacyBudget, bounds: GlobalBounds, seed: u64) -> Result<QuantileReport, CliError> {
    let req = QuantileRequest::new(q, bounds, budget).config()?;
    let estimate = private_quantile(values, &req, &mut stream(seed, &[3])).stage("private quantile")?;
    Ok(QuantileReport {
        q,
        estimate,
        n: values.len(),
        bounds,
        budget,
        seed,
    })
}
