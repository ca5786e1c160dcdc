//! Row-major CSV for real matrices with a single `# key=value ...` header line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{QhbmError, Result};
use crate::linalg::RMatrix;

pub fn write_matrix_csv(header: &[(&str, String)], m: &RMatrix) -> String {
    let mut out = String::from("#");
    for (k, v) in header {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses the header fields and the rows of numbers that follow.
pub fn read_table_csv(text: &str) -> Result<(BTreeMap<String, String>, Vec<Vec<f64>>)> {
    let parse_err = |m: String| QhbmError::Parse(m);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| parse_err("empty matrix file".into()))?;
    let fields = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err("missing '#' header".into()))?
        .split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| parse_err(format!("bad header field {kv:?}")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| parse_err(format!("{x:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fields, rows))
}

/// Parses the header fields and the square matrix that follows.
pub fn read_matrix_csv(text: &str) -> Result<(BTreeMap<String, String>, RMatrix)> {
    let (fields, rows) = read_table_csv(text)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(QhbmError::Parse(format!("expected a square matrix with {n} columns per row")));
    }
    Ok((fields, RMatrix::from_fn(n, n, |r, c| rows[r][c])))
}

pub(crate) fn header_usize(fields: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    fields
        .get(key)
        .ok_or_else(|| QhbmError::Parse(format!("header lacks {key}")))?
        .parse()
        .map_err(|e| QhbmError::Parse(format!("{key}: {e}")))
}
