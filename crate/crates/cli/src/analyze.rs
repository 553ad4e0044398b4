//! One end-to-end private analysis of a two-group dataset.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use pacdp_core::estimators::{estimate_pac, Diagnostics, Method, SanitizedStats};
use pacdp_core::inference::{combine, CombinedInference};
use pacdp_core::pac::{partition_and_difference, trim_to_divisible};
use pacdp_core::privacy::{BudgetLedger, GlobalBounds, LedgerEntry, PrivacyBudget, Share};
use pacdp_core::rng::stream;
use serde::{Deserialize, Serialize};

use crate::config::{AnalyzeRequest, InputSpec};
use crate::error::{CliError, StageExt};
use crate::ingest::{ingest_group_by_count, random_halves, read_two_columns};

/// Bumped whenever a field of [`AnalysisReport`] is renamed, removed or
/// changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub method: Method,
    pub inference: String,
    pub data: DataSummary,
    pub settings: Settings,
    pub result: CombinedInference,
    pub passes: Vec<PassReport>,
    pub ledger: LedgerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub mode: String,
    pub n1: usize,
    pub n0: usize,
    pub partitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub alpha: f64,
    pub beta: f64,
    pub bounds: GlobalBounds,
    pub budget: PrivacyBudget,
    pub budget_per_pass: PrivacyBudget,
    pub m: usize,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub pass: usize,
    pub theta: f64,
    pub w: f64,
    pub stats: Option<SanitizedStats>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub total: PrivacyBudget,
    pub spent: PrivacyBudget,
    pub spent_share: Share,
    /// `spent == total`, compared exactly.
    pub balanced: bool,
    pub entries: Vec<LedgerEntry>,
}

impl From<&BudgetLedger> for LedgerReport {
    fn from(l: &BudgetLedger) -> Self {
        let spent = l.spent();
        LedgerReport {
            total: l.total,
            spent,
            spent_share: l.spent_share(),
            balanced: spent == l.total,
            entries: l.entries.clone(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

/// Loads the two groups named by the request.
pub fn load_groups(req: &AnalyzeRequest) -> Result<(Vec<f64>, Vec<f64>, &'static str), CliError> {
    Ok(match &req.input {
        InputSpec::Inline { y1, y0 } => (y1.clone(), y0.clone(), "inline"),
        InputSpec::TwoColumn {
            path,
            treatment_column,
            control_column,
        } => {
            let (y1, y0) = read_two_columns(open(path)?, treatment_column, control_column)?;
            (y1, y0, "two_column")
        }
        InputSpec::GroupByCount {
            path,
            key_column,
            value_column,
            split_seed,
        } => {
            let y = ingest_group_by_count(open(path)?, key_column, value_column)?;
            let (y1, y0) = random_halves(&y, split_seed.unwrap_or(req.seed)).stage("split")?;
            (y1, y0, "group_by_count")
        }
    })
}

/// Partitions, runs the `m` sanitization passes and pools them.
///
/// Group sizes not divisible by `P` lose a uniformly random remainder first.
///
/// Streams: `[4, g]` trimming group `g`, `[1]` partitioning, `[2, h]` pass `h`.
pub fn analyze_groups(req: &AnalyzeRequest, y1: &[f64], y0: &[f64], mode: &str) -> Result<AnalysisReport, CliError> {
    req.validate()?;
    let spec = req.method_spec()?;
    let t1 = trim_to_divisible(y1, req.partitions, &mut stream(req.seed, &[4, 1])).stage("partition")?;
    let t0 = trim_to_divisible(y0, req.partitions, &mut stream(req.seed, &[4, 0])).stage("partition")?;
    let z = partition_and_difference(&t1, &t0, req.partitions, &mut stream(req.seed, &[1])).stage("partition")?;

    let passes_to_run = if req.method == Method::Original { 1 } else { req.m };
    let total = if req.method == Method::Original {
        PrivacyBudget {
            flavor: req.budget.flavor,
            value: 0.0,
        }
    } else {
        req.budget
    };
    let mut ledger = BudgetLedger::new(total);
    let mut passes = Vec::with_capacity(passes_to_run);
    let mut estimates = Vec::with_capacity(passes_to_run);
    for h in 0..passes_to_run {
        let out = estimate_pac(&z, &spec, &mut stream(req.seed, &[2, h as u64])).stage("estimate")?;
        if req.method != Method::Original {
            ledger
                .absorb(&format!("pass{h}/"), Share::new(1, req.m as u64), &out.ledger)
                .stage("accounting")?;
        }
        passes.push(PassReport {
            pass: h,
            theta: out.estimate.theta,
            w: out.estimate.w,
            stats: out.stats,
            diagnostics: out.estimate.diagnostics.clone(),
        });
        estimates.push(out.estimate);
    }

    let result = if req.method == Method::Original {
        CombinedInference::from_single(passes[0].theta, passes[0].w, z.len() as f64 - 1.0, req.gamma)
    } else {
        combine(&estimates, req.gamma)
    }
    .stage("combine")?;

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        method: req.method,
        inference: req.method.inference_label(req.inference).to_owned(),
        data: DataSummary {
            mode: mode.to_owned(),
            n1: y1.len(),
            n0: y0.len(),
            partitions: req.partitions,
        },
        settings: Settings {
            alpha: req.alpha,
            beta: req.beta,
            bounds: req.bounds,
            budget: total,
            budget_per_pass: spec.budget_per_pass,
            m: passes_to_run,
            gamma: req.gamma,
            seed: req.seed,
        },
        result,
        passes,
        ledger: LedgerReport::from(&ledger),
    })
}

pub fn analyze(req: &AnalyzeRequest) -> Result<AnalysisReport, CliError> {
    let (y1, y0, mode) = load_groups(req)?;
    analyze_groups(req, &y1, &y0, mode)
}

/// Pretty JSON with a trailing newline; stable for a fixed request.
pub fn report_json(report: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use pacdp_core::estimators::Inference;

    fn request(method: Method, y1: Vec<f64>, y0: Vec<f64>, partitions: usize) -> AnalyzeRequest {
        serde_json::from_value(serde_json::json!({
            "input": {"mode": "inline", "y1": y1, "y0": y0},
            "method": method,
            "partitions": partitions,
            "budget": {"flavor": "pure_dp", "value": 2.0},
            "bounds": {"lower": -10.0, "upper": 10.0},
            "seed": 9
        }))
        .unwrap()
    }

    #[test]
    fn original_reports_the_plain_mean_difference() {
        let y1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y0 = vec![0.5, 0.5, 1.0, 1.0, 2.0, 3.0];
        let req = request(Method::Original, y1.clone(), y0.clone(), 3);
        let rep = analyze(&req).unwrap();
        let want = y1.iter().sum::<f64>() / 6.0 - y0.iter().sum::<f64>() / 6.0;
        assert!((rep.result.theta - want).abs() < 1e-12);
        assert_eq!(rep.result.df, 2.0);
        assert_eq!(rep.passes.len(), 1);
        assert!(rep.ledger.balanced && rep.ledger.entries.is_empty());
        assert_eq!(rep.inference, "exact");
    }

    #[test]
    fn private_ledger_balances_exactly() {
        let y1: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let y0: Vec<f64> = (0..400).map(|i| (i % 5) as f64).collect();
        for method in [Method::TwoS, Method::FourS, Method::SixSDD, Method::Winsorized, Method::Naive] {
            let mut req = request(method, y1.clone(), y0.clone(), 40);
            req.budget = PrivacyBudget::pure(0.3).unwrap();
            let rep = analyze(&req).unwrap();
            assert!(rep.ledger.balanced, "{method}");
            assert_eq!(rep.ledger.spent_share, Share::ONE);
            assert_eq!(rep.ledger.spent, req.budget);
            assert_eq!(rep.passes.len(), 4);
        }
    }

    #[test]
    fn same_request_same_bytes() {
        let y1: Vec<f64> = (0..300).map(|i| ((i * 37) % 11) as f64).collect();
        let y0: Vec<f64> = (0..300).map(|i| ((i * 13) % 9) as f64).collect();
        let mut req = request(Method::SixS, y1, y0, 30);
        req.inference = Inference::Bayes;
        req.mcmc.iterations = 2000;
        req.mcmc.burn_in = 500;
        assert_eq!(report_json(&analyze(&req).unwrap()), report_json(&analyze(&req).unwrap()));
    }

    #[test]
    fn uneven_groups_are_trimmed_to_whole_partitions() {
        // 7 and 5 values into 2 partitions: one value of each group is dropped.
        let y1 = vec![3.0; 7];
        let y0 = vec![1.0, 1.0, 1.0, 1.0, 1.0];
        let rep = analyze(&request(Method::Original, y1, y0, 2)).unwrap();
        assert_eq!((rep.data.n1, rep.data.n0), (7, 5));
        assert_eq!(rep.result.theta, 2.0);
    }

    #[test]
    fn stage_is_named_on_failure() {
        let req = request(Method::FourS, vec![1.0; 3], vec![1.0; 3], 4);
        let err = analyze(&req).unwrap_err();
        assert!(err.to_string().starts_with("partition failed"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }
}
