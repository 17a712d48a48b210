//! Plain-text matrix tuples.
//!
//! ```text
//! # comment lines start with '#'
//! 2 3          <- n matrices of size m x m
//! 1 0 0        <- n*m rows of m numbers, one matrix after another
//! 0 1 0
//! ...
//! ```
//!
//! Blank lines are ignored. Numbers are written with 17 significant digits,
//! so a write/read cycle reproduces every entry bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{make_spd, MatrixTuple, SpdMatrix, DEFAULT_SYM_TOL};

#[derive(Debug, Error)]
pub enum TupleFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("matrix {index} (lines {first}-{last}): {source}")]
    Invalid {
        index: usize,
        first: usize,
        last: usize,
        #[source]
        source: crate::Error,
    },
    #[error("{0}")]
    Tuple(#[from] crate::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> TupleFileError {
    TupleFileError::Syntax {
        line,
        message: message.into(),
    }
}

/// Every matrix in the text, validated as SPD. Any `n ≥ 1` is accepted.
pub fn parse_matrices(text: &str) -> Result<Vec<SpdMatrix>, TupleFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty file, expected header `n m`"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [n, m] = fields.as_slice() else {
        return Err(syntax(
            header_line,
            format!("expected header `n m`, found `{header}`"),
        ));
    };
    let parse_count = |s: &str, what: &str| -> Result<usize, TupleFileError> {
        match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(syntax(
                header_line,
                format!("{what} must be a positive integer, found `{s}`"),
            )),
        }
    };
    let n = parse_count(n, "matrix count n")?;
    let m = parse_count(m, "matrix size m")?;

    let mut out = Vec::with_capacity(n);
    let mut last_line = header_line;
    for index in 0..n {
        let mut values = Vec::with_capacity(m * m);
        let mut first = None;
        for row in 0..m {
            let Some((line, text)) = lines.next() else {
                return Err(syntax(
                    last_line + 1,
                    format!(
                        "unexpected end of file: matrix {} needs row {} of {m}",
                        index + 1,
                        row + 1
                    ),
                ));
            };
            first.get_or_insert(line);
            last_line = line;
            let row_values = text
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| syntax(line, format!("`{tok}` is not a finite number")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if row_values.len() != m {
                return Err(syntax(
                    line,
                    format!("expected {m} numbers, found {}", row_values.len()),
                ));
            }
            values.extend(row_values);
        }
        let raw = DMatrix::from_row_slice(m, m, &values);
        let spd = make_spd(&raw, DEFAULT_SYM_TOL).map_err(|source| TupleFileError::Invalid {
            index: index + 1,
            first: first.unwrap_or(last_line),
            last: last_line,
            source,
        })?;
        out.push(spd);
    }
    if let Some((line, _)) = lines.next() {
        return Err(syntax(line, format!("trailing data after {n} matrices")));
    }
    Ok(out)
}

/// A tuple of at least two matrices.
pub fn parse_tuple(text: &str) -> Result<MatrixTuple, TupleFileError> {
    Ok(MatrixTuple::new(parse_matrices(text)?)?)
}

pub fn read_tuple(path: &Path) -> Result<MatrixTuple, TupleFileError> {
    Ok(MatrixTuple::new(read_matrices(path)?)?)
}

pub fn read_matrices(path: &Path) -> Result<Vec<SpdMatrix>, TupleFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| TupleFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrices(&text)
}

/// Text form of `matrices`; all must share one size.
pub fn format_matrices(matrices: &[SpdMatrix]) -> String {
    let m = matrices.first().map_or(0, SpdMatrix::dim);
    let mut out = format!("{} {}\n", matrices.len(), m);
    for a in matrices {
        for i in 0..a.dim() {
            let row: Vec<String> = (0..a.dim())
                .map(|j| format!("{:.16e}", a.get(i, j)))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn write_matrices(path: &Path, matrices: &[SpdMatrix]) -> std::io::Result<()> {
    std::fs::write(path, format_matrices(matrices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_is_exact() {
        let t = fixtures::random_tuple(3, 4, 8);
        let back = parse_tuple(&format_matrices(t.items())).unwrap();
        for (a, b) in t.items().iter().zip(back.items()) {
            assert_eq!(a.as_matrix(), b.as_matrix());
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# two identities\n2 2\n\n1 0\n0 1\n# second\n1 0\n0 1\n";
        let t = parse_tuple(text).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let bad_number = "2 2\n1 0\n0 x\n1 0\n0 1\n";
        assert_eq!(
            parse_tuple(bad_number).unwrap_err().to_string(),
            "line 3: `x` is not a finite number"
        );

        let short_row = "2 2\n1 0\n0\n";
        assert!(parse_tuple(short_row)
            .unwrap_err()
            .to_string()
            .starts_with("line 3: expected 2 numbers"));

        let truncated = "2 2\n1 0\n0 1\n1 0\n";
        assert!(parse_tuple(truncated)
            .unwrap_err()
            .to_string()
            .contains("unexpected end of file"));

        let asymmetric = "2 2\n1 0\n0 1\n1 2\n0 1\n";
        let err = parse_tuple(asymmetric).unwrap_err().to_string();
        assert!(
            err.starts_with("matrix 2 (lines 4-5): matrix is not symmetric"),
            "{err}"
        );

        let indefinite = "2 2\n1 0\n0 1\n1 2\n2 1\n";
        let err = parse_tuple(indefinite).unwrap_err().to_string();
        assert!(err.contains("not positive definite"), "{err}");

        assert!(parse_tuple("2\n")
            .unwrap_err()
            .to_string()
            .starts_with("line 1: expected header"));
        assert!(parse_tuple("2 2\n1 0\n0 1\n1 0\n0 1\n5\n")
            .unwrap_err()
            .to_string()
            .starts_with("line 6: trailing"));
    }

    #[test]
    fn single_matrix_files_need_the_matrix_reader() {
        let text = "1 2\n2 0\n0 3\n";
        assert_eq!(parse_matrices(text).unwrap().len(), 1);
        assert!(parse_tuple(text).is_err());
    }
}
