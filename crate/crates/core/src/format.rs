//! Matrix and vector text formats.
//!
//! ```text
//! # views: V1,V2,V3
//! 0.708333333333,0.125000000000,0.166666666667
//! ...
//! ```
//!
//! Numbers are printed as plain decimals with 12 significant digits and no
//! locale-dependent formatting.

use thiserror::Error;

use crate::markov::{MarkovError, StateVector, TransitionMatrix};
use crate::trace::{TraceError, ViewCatalog};

pub const VIEWS_PREFIX: &str = "# views:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("missing `{VIEWS_PREFIX}` line")]
    MissingViews,
    #[error("bad view list: {0}")]
    BadViews(TraceError),
    #[error("line {line}: expected {expected} values, found {found}")]
    WrongWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{text}` is not a number")]
    BadNumber { line: usize, text: String },
    #[error("expected {expected} rows, found {found}")]
    WrongHeight { expected: usize, found: usize },
    #[error(transparent)]
    Matrix(#[from] MarkovError),
}

/// Plain decimal with 12 significant digits.
pub fn fmt_sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000000".to_owned();
    }
    // Exponent after rounding to 12 significant digits.
    let sci = format!("{x:.11e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("scientific format has an exponent");
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn join_values(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_sig12(v))
        .collect::<Vec<_>>()
        .join(",")
}

fn views_line(catalog: &ViewCatalog) -> String {
    format!("{VIEWS_PREFIX} {}", catalog.names().join(","))
}

pub fn write_matrix_csv(catalog: &ViewCatalog, rows: &[Vec<f64>]) -> String {
    let mut out = views_line(catalog);
    out.push('\n');
    for r in rows {
        out.push_str(&join_values(r));
        out.push('\n');
    }
    out
}

pub fn write_vector(catalog: &ViewCatalog, v: &StateVector) -> String {
    format!("{}\n{}\n", views_line(catalog), join_values(v.probs()))
}

fn parse_views(line: &str) -> Result<ViewCatalog, FormatError> {
    let rest = line
        .strip_prefix(VIEWS_PREFIX)
        .ok_or(FormatError::MissingViews)?
        .trim_start();
    if rest.is_empty() {
        return Ok(ViewCatalog::new());
    }
    ViewCatalog::from_names(rest.split(',')).map_err(FormatError::BadViews)
}

fn parse_values(line: &str, line_no: usize, width: usize) -> Result<Vec<f64>, FormatError> {
    let values = line
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| FormatError::BadNumber {
                    line: line_no,
                    text: t.to_owned(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != width {
        return Err(FormatError::WrongWidth {
            line: line_no,
            expected: width,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Content lines with their 1-based numbers; blank lines and `#` comments
/// after the first line are skipped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Raw rows as written, before the stochastic check.
pub fn parse_matrix_rows(input: &[u8]) -> Result<(ViewCatalog, Vec<Vec<f64>>), FormatError> {
    let text = std::str::from_utf8(input).map_err(|_| FormatError::InvalidUtf8)?;
    let first = text.lines().next().ok_or(FormatError::MissingViews)?;
    let catalog = parse_views(first.trim_end_matches('\r'))?;
    let n = catalog.len();
    let rows = data_lines(text)
        .map(|(no, l)| parse_values(l, no, n))
        .collect::<Result<Vec<_>, _>>()?;
    if rows.len() != n {
        return Err(FormatError::WrongHeight {
            expected: n,
            found: rows.len(),
        });
    }
    Ok((catalog, rows))
}

pub fn parse_matrix_csv(input: &[u8]) -> Result<(ViewCatalog, TransitionMatrix), FormatError> {
    let (catalog, rows) = parse_matrix_rows(input)?;
    let matrix = TransitionMatrix::from_rows(&rows)?;
    Ok((catalog, matrix))
}

/// Reads the vector format back (trailing `#` lines are ignored).
pub fn parse_vector(input: &[u8]) -> Result<(ViewCatalog, StateVector), FormatError> {
    let text = std::str::from_utf8(input).map_err(|_| FormatError::InvalidUtf8)?;
    let first = text.lines().next().ok_or(FormatError::MissingViews)?;
    let catalog = parse_views(first.trim_end_matches('\r'))?;
    let mut lines = data_lines(text);
    let (no, line) = lines.next().ok_or(FormatError::WrongHeight {
        expected: 1,
        found: 0,
    })?;
    let probs = parse_values(line, no, catalog.len())?;
    if lines.next().is_some() {
        return Err(FormatError::WrongHeight {
            expected: 1,
            found: 2,
        });
    }
    Ok((catalog, StateVector::new(probs)?))
}
