//! Plain-text matrix and vector files.
//!
//! Matrix: a `rows cols` header line, then one line per row with
//! space-separated values. Vector: a `len` header line, then one value per
//! line. Values are written with 17 significant digits, which round-trips
//! every finite `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: msg.into() }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_string(a: &DenseMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", a.rows(), a.cols()).unwrap();
    for i in 0..a.rows() {
        let line: Vec<String> = a.row_view(i).iter().map(|&v| format_value(v)).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn vector_to_string(v: &[f64]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", v.len()).unwrap();
    for &x in v {
        writeln!(out, "{}", format_value(x)).unwrap();
    }
    out
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_to_string(a)).map_err(io_err(path))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    fs::write(path, vector_to_string(v)).map_err(io_err(path))
}

fn parse_tokens<'a>(path: &Path, tokens: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    tokens
        .map(|t| t.parse::<f64>().map_err(|e| parse_err(path, format!("bad value {t:?}: {e}"))))
        .collect()
}

pub fn parse_matrix(path: &Path, text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(path, format!("header must be `rows cols`, got {header:?}")));
    };

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let row = parse_tokens(path, line.split_whitespace())?;
        if row.len() != cols {
            return Err(parse_err(
                path,
                format!("row {seen} has {} values, expected {cols}", row.len()),
            ));
        }
        values.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(path, format!("expected {rows} rows, found {seen}")));
    }
    DenseMatrix::new(rows, cols, values)
}

pub fn parse_vector(path: &Path, text: &str) -> Result<DenseVector> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let len: usize = header
        .trim()
        .parse()
        .map_err(|e| parse_err(path, format!("bad header {header:?}: {e}")))?;
    let values = parse_tokens(path, lines.flat_map(str::split_whitespace))?;
    if values.len() != len {
        return Err(parse_err(path, format!("expected {len} values, found {}", values.len())));
    }
    DenseVector::new(values)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix(path, &text)
}

pub fn read_vector(path: &Path) -> Result<DenseVector> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_vector(path, &text)
}
