//! Tabular output of simulation runs.

use std::io::Write;

use pacdp_core::sim::{MetricsRow, ScenarioConfig, ScenarioResult};
use serde::Serialize;

use crate::error::CliError;

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("writing CSV: {e}"))
}

/// One `MetricsRow` per line, with a header.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("writing CSV: {e}")))
}

#[derive(Serialize)]
struct OutcomeLine<'a> {
    method: &'a str,
    inference: &'a str,
    flavor: &'a str,
    budget: f64,
    repeat: usize,
    theta: Option<f64>,
    total_var: Option<f64>,
    df: Option<f64>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    p_value: Option<f64>,
    error: Option<&'a str>,
}

/// Per-repeat pooled inferences; failed repeats keep their error message.
pub fn write_outcomes<W: Write>(result: &ScenarioResult, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for (row, cell) in result.rows.iter().zip(&result.outcomes) {
        for o in cell {
            let inf = o.inference.as_ref();
            w.serialize(OutcomeLine {
                method: &row.method,
                inference: &row.inference,
                flavor: &row.flavor,
                budget: row.budget,
                repeat: o.repeat,
                theta: inf.map(|c| c.theta),
                total_var: inf.map(|c| c.total_var),
                df: inf.map(|c| c.df).filter(|d| d.is_finite()),
                ci_lower: inf.map(|c| c.ci.0),
                ci_upper: inf.map(|c| c.ci.1),
                p_value: inf.map(|c| c.p_value),
                error: o.error.as_deref(),
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Data(format!("writing CSV: {e}")))
}

/// Writes `metrics.csv`, `outcomes.csv` and the resolved `scenario.json`.
pub fn write_run(dir: &std::path::Path, cfg: &ScenarioConfig, result: &ScenarioResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| CliError::io(p, e))
    };
    write_metrics(&result.rows, create("metrics.csv")?)?;
    write_outcomes(result, create("outcomes.csv")?)?;
    let mut f = create("scenario.json")?;
    let mut json = serde_json::to_string_pretty(cfg).expect("config serializes");
    json.push('\n');
    f.write_all(json.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(dir.join("scenario.json"), e))
}
