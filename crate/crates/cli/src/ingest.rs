// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV input: one row per time point, one column per coordinate.

use std::io::Read;
use std::path::Path;

use hdcpd_core::DataSequence;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {col}: cannot parse `{field}` as a number")]
    ParseError { line: u64, col: usize, field: String },
    #[error("line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: u64, found: usize, expected: usize },
    #[error("line {line}, column {col}: non-finite value")]
    NonFinite { line: u64, col: usize },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Core(#[from] hdcpd_core::Error),
}

pub fn ingest_csv(path: &Path) -> Result<DataSequence, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(file)
}

/// Parse a rectangular numeric CSV. A first row that does not parse as
/// numbers is taken as a header and skipped.
pub fn parse_csv<R: Read>(reader: R) -> Result<DataSequence, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if k == 0 && parsed.iter().any(Result::is_err) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(IngestError::RaggedRows {
                line,
                found: record.len(),
                expected,
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, value) in parsed.into_iter().enumerate() {
            let v = value.map_err(|_| IngestError::ParseError {
                line,
                col: c + 1,
                field: record[c].to_string(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::NonFinite { line, col: c + 1 });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(hdcpd_core::validate_sequence(&rows)?)
}
