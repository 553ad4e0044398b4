//! CSV ingestion: group-by sums, two-column groups, single columns, and the
//! random split of one sample into two groups.

use std::collections::HashMap;
use std::io::Read;

use pacdp_core::rng::stream;
use pacdp_core::{Error, Result as CoreResult};
use rand::seq::SliceRandom;

use crate::error::CliError;

/// Stream tag for the random split, distinct from the analysis streams.
const SPLIT_STREAM: u64 = 0x5350_4c49_54;

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(input)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::config(format!("column {name:?} not found; header is {:?}", headers.iter().collect::<Vec<_>>())))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_cell(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>, CliError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| CliError::Data(format!("line {}: column {name:?}: cannot parse {raw:?} as a number", line_of(rec))))
}

fn csv_error(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Data(format!("line {line}: {e}"))
}

/// Sums `value_col` per distinct `key_col`, in order of first appearance.
pub fn ingest_group_by_count<R: Read>(input: R, key_col: &str, value_col: &str) -> Result<Vec<f64>, CliError> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let (ki, vi) = (column(&headers, key_col)?, column(&headers, value_col)?);
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut sums = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let value = parse_cell(&rec, vi, value_col)?
            .ok_or_else(|| CliError::Data(format!("line {}: column {value_col:?} is empty", line_of(&rec))))?;
        let key = rec.get(ki).unwrap_or("");
        match slot.get(key) {
            Some(&i) => sums[i] += value,
            None => {
                slot.insert(key.to_owned(), sums.len());
                sums.push(value);
            }
        }
    }
    Ok(sums)
}

/// Reads the treatment and control columns; blank cells are skipped.
pub fn read_two_columns<R: Read>(input: R, treatment: &str, control: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (i1, i0) = (column(&headers, treatment)?, column(&headers, control)?);
    let (mut y1, mut y0) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        y1.extend(parse_cell(&rec, i1, treatment)?);
        y0.extend(parse_cell(&rec, i0, control)?);
    }
    Ok((y1, y0))
}

/// Reads one numeric column (the first one when `name` is `None`).
pub fn read_column<R: Read>(input: R, name: Option<&str>) -> Result<Vec<f64>, CliError> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (idx, label) = match name {
        Some(n) => (column(&headers, n)?, n.to_owned()),
        None => (0, headers.get(0).unwrap_or("").to_owned()),
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        out.extend(parse_cell(&rec, idx, &label)?);
    }
    Ok(out)
}

/// Seeded uniform split: a random permutation whose first half (the larger
/// one for odd lengths) becomes `y₁`.
pub fn random_halves(y: &[f64], seed: u64) -> CoreResult<(Vec<f64>, Vec<f64>)> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {} value(s) into two groups", y.len())));
    }
    let mut v = y.to_vec();
    v.shuffle(&mut stream(seed, &[SPLIT_STREAM]));
    let y0 = v.split_off(y.len().div_ceil(2));
    Ok((v, y0))
}
