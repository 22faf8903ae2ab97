//! Matrix file formats.
//!
//! JSON: `{"n": 3, "rows": [[...], [...], [...]]}`.
//! Text: the order `n` followed by `n` lines of `n` whitespace-separated numbers.
//! Both readers reject NaN and infinities.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QapError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    rows: Vec<Vec<f64>>,
}

pub fn parse_matrix_json(s: &str) -> Result<Matrix> {
    let file: MatrixFile = serde_json::from_str(s)?;
    check_shape(file.n, &file.rows)?;
    Ok(Matrix::from_rows(&file.rows))
}

pub fn parse_matrix_text(s: &str) -> Result<Matrix> {
    let mut tokens = s.split_whitespace();
    let n: usize = tokens
        .next()
        .ok_or_else(|| QapError::Parse("empty matrix file".into()))?
        .parse()
        .map_err(|e| QapError::Parse(format!("bad order: {e}")))?;
    let mut values = Vec::with_capacity(n * n);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|e| QapError::Parse(format!("bad entry {tok:?}: {e}")))?;
        values.push(v);
    }
    if values.len() != n * n {
        return Err(QapError::Parse(format!(
            "expected {} entries for n = {n}, found {}",
            n * n,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QapError::NonFinite);
    }
    Ok(Matrix::from_vec(n, n, values))
}

/// Parses either format: JSON when the first non-blank character is `{`.
pub fn parse_matrix(s: &str) -> Result<Matrix> {
    if s.trim_start().starts_with('{') {
        parse_matrix_json(s)
    } else {
        parse_matrix_text(s)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn matrix_to_json(m: &Matrix) -> Result<String> {
    Ok(serde_json::to_string(&MatrixFile {
        n: m.rows(),
        rows: m.to_rows(),
    })?)
}

pub fn matrix_to_text(m: &Matrix) -> String {
    let mut out = format!("{}\n", m.rows());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn check_shape(n: usize, rows: &[Vec<f64>]) -> Result<()> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(QapError::Parse(format!("rows do not form a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QapError::NonFinite);
    }
    Ok(())
}
