//! Comma-separated data files with a header row.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::model_io::write_atomic;

/// Reads a numeric CSV. Row numbers in errors count the header as row 1.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let parse_err = |row: usize, column: &str, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, "", format!("{other:?}")),
        })?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.iter().any(String::is_empty) {
        return Err(parse_err(1, "", "empty column name in header".into()));
    }
    let m = names.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(row, "", e.to_string()))?;
        if rec.len() != m {
            return Err(parse_err(row, "", format!("expected {m} fields, found {}", rec.len())));
        }
        for (field, name) in rec.iter().zip(&names) {
            if field.is_empty() {
                return Err(parse_err(row, name, "blank cell".into()));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row, name, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, name, format!("'{field}' is not finite")));
            }
            data.push(v);
        }
        n += 1;
    }
    let values = Array2::from_shape_vec((n, m), data).expect("row lengths checked");
    DataMatrix::new(values, names).map_err(|e| match e {
        Error::InvalidData(msg) => Error::InvalidData(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Formats a matrix with a header row; floats use shortest round-trip text.
pub fn to_csv_string(names: &[String], values: &Array2<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidData(format!("cannot format CSV: {e}"));
    w.write_record(names).map_err(fail)?;
    for row in values.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidData(format!("cannot format CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_matrix(path: impl AsRef<Path>, data: &DataMatrix) -> Result<()> {
    write_atomic(path.as_ref(), &to_csv_string(data.col_names(), data.values())?)
}

/// Writes arbitrary string records under a header.
pub fn write_records(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidData(format!("cannot format CSV: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidData(format!("cannot format CSV: {e}")))?;
    write_atomic(path.as_ref(), &String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
