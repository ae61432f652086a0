//! CSV ingestion for datasets and accuracy rows.

use std::path::Path;

use causal_audit_core::{AccuracyRow, Dataset, DatasetError};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("file has no header row")]
    NoHeader,
    #[error("file has a header but no data rows")]
    NoRows,
    #[error("line {line}, column {column:?}: {value:?} is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column:?}: {value:?} is not a boolean")]
    NotBoolean { line: u64, column: String, value: String },
    #[error("line {line}: score {value:?} is not an integer")]
    BadScore { line: u64, value: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Dataset content digest, used as the session fingerprint.
pub fn fingerprint(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    std::fs::read(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Csv { line, message: e.to_string() }
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(bytes)
}

/// Parses comma-separated numeric data with one header row. Any row holding
/// a non-numeric or empty cell is rejected, naming its line number (the
/// header is line 1).
pub fn read_dataset(bytes: &[u8]) -> Result<Dataset, IngestError> {
    let bytes = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes);
    let mut rdr = reader(bytes);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(|n| n.is_empty()) {
        return Err(IngestError::NoHeader);
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(IngestError::FieldCount { line, expected: names.len(), found: record.len() });
        }
        for (c, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[c].push(v),
                _ => {
                    return Err(IngestError::NonNumeric { line, column: names[c].clone(), value: cell.to_string() });
                }
            }
        }
    }
    if columns[0].is_empty() {
        return Err(IngestError::NoRows);
    }
    Ok(Dataset::new(names, columns)?)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Reads accuracy rows from a CSV with columns `proposed_direction_correct`,
/// `judged_correct` and `score` (blank for no numeric answer). When
/// `judged_correct` is absent it copies `proposed_direction_correct`.
pub fn read_accuracy_rows(bytes: &[u8]) -> Result<Vec<AccuracyRow>, IngestError> {
    let mut rdr = reader(bytes);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let proposed = find("proposed_direction_correct")
        .ok_or_else(|| IngestError::MissingColumn("proposed_direction_correct".into()))?;
    let judged = find("judged_correct");
    let score = find("score").ok_or_else(|| IngestError::MissingColumn("score".into()))?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let boolean = |i: usize, column: &str| {
            parse_bool(field(i)).ok_or_else(|| IngestError::NotBoolean {
                line,
                column: column.to_string(),
                value: field(i).to_string(),
            })
        };
        let p = boolean(proposed, "proposed_direction_correct")?;
        let j = match judged {
            Some(i) => boolean(i, "judged_correct")?,
            None => p,
        };
        let s = match field(score) {
            "" => None,
            v => Some(v.parse::<u8>().map_err(|_| IngestError::BadScore { line, value: v.to_string() })?),
        };
        rows.push(AccuracyRow { proposed_direction_correct: p, judged_correct: j, score: s });
    }
    Ok(rows)
}

/// Writes a dataset back out as CSV.
pub fn write_dataset(data: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(data.names()).expect("in-memory write");
    for r in 0..data.n_rows() {
        w.write_record((0..data.n_cols()).map(|c| data.column(c)[r].to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
