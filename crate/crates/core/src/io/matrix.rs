use std::io::Write;

use ndarray::Array2;
use serde_json::Value;

use crate::error::{Error, Result};

/// A numeric matrix with optional column names taken from a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub names: Option<Vec<String>>,
    pub data: Array2<f64>,
}

fn parse_cell(cell: &str, source: &str, row: usize, column: usize) -> Result<f64> {
    let err = |message: String| Error::Parse {
        source_name: source.to_string(),
        row,
        column,
        message,
    };
    if cell.is_empty() {
        return Err(err("missing value".into()));
    }
    let value: f64 = cell
        .parse()
        .map_err(|_| err(format!("non-numeric value {cell:?}")))?;
    if !value.is_finite() {
        return Err(err(format!("non-finite value {cell:?}")));
    }
    Ok(value)
}

fn looks_numeric(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

/// Parses a CSV matrix (RFC 4180 quoting, dot decimal separator). The first
/// row is a header when any of its cells is not a number. Rows and columns
/// in error messages are 1-based positions in the file.
pub fn parse_csv_matrix(text: &str, source: &str) -> Result<NamedMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut names = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            source_name: source.to_string(),
            row,
            column: 1,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(row, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && record.iter().any(|c| !c.is_empty() && !looks_numeric(c)) {
            names = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                source_name: source.to_string(),
                row,
                column: record.len().min(expected) + 1,
                message: format!("ragged row: {} fields, expected {}", record.len(), expected),
            });
        }
        rows.push(
            record
                .iter()
                .enumerate()
                .map(|(j, cell)| parse_cell(cell, source, row, j + 1))
                .collect::<Result<_>>()?,
        );
    }
    let n_cols = width.unwrap_or(0);
    let data = Array2::from_shape_fn((rows.len(), n_cols), |(r, c)| rows[r][c]);
    Ok(NamedMatrix { names, data })
}

/// Writes a matrix as CSV with shortest round-trip number formatting.
pub fn write_csv_matrix<W: Write>(out: W, names: Option<&[String]>, data: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_format = |e: csv::Error| Error::format("csv", e.to_string());
    if let Some(names) = names {
        w.write_record(names).map_err(to_format)?;
    }
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(to_format)?;
    }
    w.flush().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(())
}

/// Converts a JSON array of rows into a matrix, with 1-based coordinates in errors.
pub fn json_rows(value: &Value, source: &str) -> Result<Array2<f64>> {
    let rows = value
        .as_array()
        .ok_or_else(|| Error::format(source, "expected an array of rows"))?;
    let mut width = None;
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let err = |column: usize, message: String| Error::Parse {
            source_name: source.to_string(),
            row: i + 1,
            column,
            message,
        };
        let cells = row
            .as_array()
            .ok_or_else(|| err(1, "row is not an array".into()))?;
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(err(
                cells.len().min(expected) + 1,
                format!("ragged row: {} fields, expected {}", cells.len(), expected),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v = match cell {
                Value::Null => return Err(err(j + 1, "missing value".into())),
                Value::Number(n) => n.as_f64().ok_or_else(|| err(j + 1, "number out of range".into()))?,
                other => return Err(err(j + 1, format!("non-numeric value {other}"))),
            };
            data.push(v);
        }
    }
    let shape = (rows.len(), width.unwrap_or(0));
    Array2::from_shape_vec(shape, data).map_err(|e| Error::format(source, e.to_string()))
}

pub fn matrix_to_json(m: &Array2<f64>) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|r| Value::Array(r.iter().map(|&v| Value::from(v)).collect()))
            .collect(),
    )
}
