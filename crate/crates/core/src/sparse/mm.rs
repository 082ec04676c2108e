//! Matrix Market reading and writing.
//!
//! Supports `coordinate` files with `real` or `integer` fields and
//! `symmetric` or `general` symmetry, and dense `array` files. Values are
//! written with 17 significant digits so a round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::SparseSymmetric;
use crate::error::{Error, Result};
use crate::la::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

struct Header {
    format: Format,
    symmetric: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<Header> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "expected a %%MatrixMarket matrix header"));
    }
    let format = match words[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    }
    let symmetric = match words[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header { format, symmetric })
}

/// Non-comment lines with their 1-based line numbers, header excluded.
fn body(text: &str) -> Result<(Header, Vec<(usize, &str)>)> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => parse_header(l)?,
        None => return Err(parse_err(1, "empty file")),
    };
    let rest = lines
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
        .collect();
    Ok((header, rest))
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

/// Parses a sparse symmetric matrix from Matrix Market text.
pub fn parse_sparse(text: &str) -> Result<SparseSymmetric> {
    let (header, lines) = body(text)?;
    if header.format != Format::Coordinate {
        return Err(parse_err(1, "expected a coordinate matrix"));
    }
    let mut it = lines.into_iter();
    let (ln, size) = it.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut t = size.split_whitespace();
    let rows: usize = num(ln, t.next(), "row count")?;
    let cols: usize = num(ln, t.next(), "column count")?;
    let nnz: usize = num(ln, t.next(), "entry count")?;
    if rows != cols {
        return Err(parse_err(ln, format!("matrix is {rows}x{cols}, not square")));
    }
    let mut trip = Vec::with_capacity(2 * nnz);
    for (ln, l) in it.by_ref().take(nnz) {
        let mut t = l.split_whitespace();
        let i: usize = num(ln, t.next(), "row index")?;
        let j: usize = num(ln, t.next(), "column index")?;
        let v: f64 = num(ln, t.next(), "value")?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
        }
        trip.push((i - 1, j - 1, v));
        if header.symmetric && i != j {
            trip.push((j - 1, i - 1, v));
        }
    }
    if trip.len() < nnz {
        return Err(parse_err(0, format!("expected {nnz} entries")));
    }
    SparseSymmetric::from_triplets(rows, &trip)
}

/// Parses a dense matrix from Matrix Market text (array or coordinate).
pub fn parse_dense(text: &str) -> Result<DenseMatrix> {
    let (header, lines) = body(text)?;
    let mut it = lines.into_iter();
    let (ln, size) = it.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let mut t = size.split_whitespace();
    let rows: usize = num(ln, t.next(), "row count")?;
    let cols: usize = num(ln, t.next(), "column count")?;
    let mut m = DMatrix::zeros(rows, cols);
    match header.format {
        Format::Array => {
            let mut vals = Vec::with_capacity(rows * cols);
            for (ln, l) in it {
                for tok in l.split_whitespace() {
                    vals.push(num::<f64>(ln, Some(tok), "value")?);
                }
            }
            let mut k = 0;
            for j in 0..cols {
                let start = if header.symmetric { j } else { 0 };
                for i in start..rows {
                    let v = *vals.get(k).ok_or_else(|| parse_err(0, "too few values"))?;
                    m[(i, j)] = v;
                    if header.symmetric {
                        m[(j, i)] = v;
                    }
                    k += 1;
                }
            }
        }
        Format::Coordinate => {
            let nnz: usize = num(ln, t.next(), "entry count")?;
            for (ln, l) in it.take(nnz) {
                let mut t = l.split_whitespace();
                let i: usize = num(ln, t.next(), "row index")?;
                let j: usize = num(ln, t.next(), "column index")?;
                let v: f64 = num(ln, t.next(), "value")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                m[(i - 1, j - 1)] += v;
                if header.symmetric && i != j {
                    m[(j - 1, i - 1)] += v;
                }
            }
        }
    }
    Ok(m)
}

pub fn read_sparse(path: impl AsRef<Path>) -> Result<SparseSymmetric> {
    parse_sparse(&fs::read_to_string(path)?)
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_dense(&fs::read_to_string(path)?)
}

/// Lower triangle in symmetric coordinate format.
pub fn format_sparse(a: &SparseSymmetric) -> String {
    let lower: Vec<_> = a.triplets().into_iter().filter(|(i, j, _)| i >= j).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", a.n(), a.n(), lower.len());
    for (i, j, v) in lower {
        let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    s
}

/// Column-major general array format.
pub fn format_dense(m: &DenseMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn write_sparse(path: impl AsRef<Path>, a: &SparseSymmetric) -> Result<()> {
    fs::write(path, format_sparse(a))?;
    Ok(())
}

pub fn write_dense(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    fs::write(path, format_dense(m))?;
    Ok(())
}
