//! Matrix Market coordinate I/O and a plain-text vector format.
//!
//! Matrices are read from `coordinate real {general|symmetric}` files and
//! always written as `coordinate real general`, 1-based, in row-major order
//! with 17 significant digits. Vectors are written one value per line; on
//! input the Matrix Market `array` format is accepted as well.

use std::io::{BufRead, Write};

use super::CsrMatrix;
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Lines with their 1-based numbers, skipping blank lines and `%` comments
/// after the header.
fn data_lines<R: BufRead>(
    lines: &mut std::iter::Enumerate<std::io::Lines<R>>,
) -> impl Iterator<Item = Result<(usize, String)>> + '_ {
    lines.filter_map(|(idx, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((idx + 1, t.to_string())))
            }
        }
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

struct Header {
    coordinate: bool,
    symmetric: bool,
}

fn parse_header(line: &str) -> Result<Header> {
    let toks: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match toks[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format {other:?}"))),
    };
    if toks[3] != "real" {
        return Err(parse_err(1, format!("unsupported field {:?}; only real is accepted", toks[3])));
    }
    let symmetric = match toks[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry {other:?}"))),
    };
    Ok(Header { coordinate, symmetric })
}

/// Reads a sparse matrix; symmetric files are expanded to full storage.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => parse_header(&l?)?,
        None => return Err(parse_err(1, "empty input")),
    };
    if !header.coordinate {
        return Err(parse_err(1, "matrices must use the coordinate format"));
    }
    let mut data = data_lines(&mut lines);
    let (size_line, size) = data.next().ok_or_else(|| parse_err(2, "missing size line"))??;
    let mut toks = size.split_whitespace();
    let nrows: usize = parse_num(toks.next(), size_line, "row count")?;
    let ncols: usize = parse_num(toks.next(), size_line, "column count")?;
    let nnz: usize = parse_num(toks.next(), size_line, "entry count")?;
    if header.symmetric && nrows != ncols {
        return Err(parse_err(size_line, "symmetric matrix must be square"));
    }

    let mut trip = Vec::with_capacity(if header.symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for entry in data {
        let (line, text) = entry?;
        if seen == nnz {
            return Err(parse_err(line, format!("more than the declared {nnz} entries")));
        }
        let mut toks = text.split_whitespace();
        let i: usize = parse_num(toks.next(), line, "row index")?;
        let j: usize = parse_num(toks.next(), line, "column index")?;
        let v: f64 = parse_num(toks.next(), line, "value")?;
        if toks.next().is_some() {
            return Err(parse_err(line, "trailing tokens after value"));
        }
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(line, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
        }
        if header.symmetric && j > i {
            return Err(parse_err(line, "symmetric files must store the lower triangle only"));
        }
        trip.push((i - 1, j - 1, v));
        if header.symmetric && i != j {
            trip.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(size_line, format!("declared {nnz} entries, found {seen}")));
    }
    CsrMatrix::from_triplets(nrows, ncols, &trip)
}

pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut sink: W) -> Result<()> {
    writeln!(sink, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(sink, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(sink, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads a vector stored one value per line, or as a Matrix Market
/// `array real general` column.
pub fn read_vector<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut lines = reader.lines().enumerate();
    let mut values = Vec::new();
    let mut expected = None;
    let mut first = true;
    while let Some((idx, line)) = lines.next() {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if first && t.starts_with("%%") {
            let header = parse_header(t)?;
            if header.coordinate || header.symmetric {
                return Err(parse_err(line_no, "vectors must use the 'array real general' format"));
            }
            let mut data = data_lines(&mut lines);
            let (size_line, size) = data.next().ok_or_else(|| parse_err(2, "missing size line"))??;
            let mut toks = size.split_whitespace();
            let rows: usize = parse_num(toks.next(), size_line, "row count")?;
            let cols: usize = parse_num(toks.next(), size_line, "column count")?;
            if cols != 1 {
                return Err(parse_err(size_line, "vector arrays must have exactly one column"));
            }
            expected = Some((size_line, rows));
            for entry in data {
                let (l, text) = entry?;
                values.push(parse_num(Some(text.as_str()), l, "value")?);
            }
            break;
        }
        first = false;
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        values.push(parse_num(Some(t), line_no, "value")?);
    }
    if let Some((line, rows)) = expected {
        if rows != values.len() {
            return Err(parse_err(line, format!("declared {rows} values, found {}", values.len())));
        }
    }
    Ok(values)
}

pub fn write_vector<W: Write>(v: &[f64], mut sink: W) -> Result<()> {
    for x in v {
        writeln!(sink, "{x:.16e}")?;
    }
    sink.flush()?;
    Ok(())
}
