//! Feature matrix files.
//!
//! Two encodings are accepted, distinguished by the first bytes of the file:
//!
//! * CSV: UTF-8, one sample per row, no header, comma-separated decimal floats;
//! * binary: the 8-byte magic [`BINARY_MAGIC`], then `N` and `d` as
//!   little-endian `u64`, then `N·d` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BINARY_MAGIC: [u8; 8] = *b"CURLMAT\x01";
pub const BINARY_HEADER_LEN: usize = 24;

/// Reads a CSV or binary matrix, checking the column count against
/// `expected_dim` when given.
pub fn load_feature_matrix<F: Scalar>(path: &Path, expected_dim: Option<usize>) -> Result<Array2<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = if bytes.starts_with(&BINARY_MAGIC) {
        decode_binary(path, &bytes)?
    } else {
        decode_csv(path, &bytes)?
    };
    if let Some(dim) = expected_dim {
        if m.nrows() > 0 && m.ncols() != dim {
            return Err(Error::FeatureDimension {
                path: path.to_path_buf(),
                row: 0,
                expected: dim,
                found: m.ncols(),
            });
        }
    }
    if let Some(((row, column), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteEntry {
            path: path.to_path_buf(),
            row,
            column,
        });
    }
    let m = if m.nrows() == 0 {
        Array2::zeros((0, expected_dim.unwrap_or(0)))
    } else {
        m
    };
    Ok(m.mapv(F::lit))
}

fn decode_csv(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::FeatureDimension {
                path: path.to_path_buf(),
                row: rows,
                expected,
                found: record.len(),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("'{field}' is not a number"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, width.unwrap_or(0)), values).expect("rows of equal width"))
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(format_err("truncated binary header".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let body = &bytes[BINARY_HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_err(format!("matrix size {rows}x{cols} overflows")))?;
    if body.len() != expected {
        return Err(format_err(format!(
            "header declares {rows}x{cols} values ({expected} bytes) but body has {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("checked size"))
}

pub fn write_feature_matrix_csv<F: Scalar>(path: &Path, m: ArrayView2<'_, F>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.as_f64().to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_feature_matrix_binary<F: Scalar>(path: &Path, m: ArrayView2<'_, F>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&BINARY_MAGIC).map_err(io)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.ncols() as u64).to_le_bytes()).map_err(io)?;
    for v in m.iter() {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads one label token per line; blank lines and `?` mark unlabeled rows.
pub fn load_label_tokens(path: &Path) -> Result<Vec<Option<String>>> {
    let mut text = String::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| {
            let t = l.trim();
            (!t.is_empty() && t != "?").then(|| t.to_string())
        })
        .collect())
}
