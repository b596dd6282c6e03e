//! Data ingestion: a numeric CSV matrix, or one line of eigenvalues.

use ndarray::Array2;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// `n × p` observations, one row per observation.
    Matrix(Array2<f64>),
    /// Precomputed sample-covariance eigenvalues, in file order.
    Eigenvalues(Vec<f64>),
}

fn parse_error(line: usize, column: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("line {line}, column {column}: {msg}"))
}

fn parse_cell(field: &str, line: usize, column: usize) -> CliResult<f64> {
    let t = field.trim();
    if t.is_empty() {
        return Err(parse_error(line, column, "empty field"));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| parse_error(line, column, format!("`{t}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, column, format!("`{t}` is not finite")));
    }
    Ok(v)
}

/// Parses CSV text. A first record with any non-numeric field is taken as a
/// header and skipped. A single numeric record is read as eigenvalues.
pub fn parse_input(text: &str) -> CliResult<Input> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::Parse(format!("line {line}: {e}"))
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        rows.push((line, rec));
    }
    if let Some((_, first)) = rows.first() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Parse("input contains no numeric rows".into()));
    }
    let width = rows[0].1.len();
    let mut values = Vec::with_capacity(rows.len() * width);
    for (line, rec) in &rows {
        if rec.len() != width {
            return Err(parse_error(
                *line,
                rec.len().min(width) + 1,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            values.push(parse_cell(field, *line, j + 1)?);
        }
    }
    if rows.len() == 1 {
        return Ok(Input::Eigenvalues(values));
    }
    let m = Array2::from_shape_vec((rows.len(), width), values).expect("rectangular by construction");
    Ok(Input::Matrix(m))
}

pub fn read_input(path: &std::path::Path) -> CliResult<(Input, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Ok((parse_input(&text)?, text))
}
