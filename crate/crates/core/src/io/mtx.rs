//! Matrix Market coordinate files (`real` or `integer`, `general` or
//! `symmetric`).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, Triple};

use super::{read_text, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_mtx(path: &Path) -> Result<SparseMatrix> {
    let text = read_text(path)?;
    parse_mtx(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_mtx(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let symmetry = parse_banner(banner)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triples = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((rows, cols, nnz)) = size else {
            if fields.len() != 3 {
                return Err(parse_err(lineno, "size line needs `rows cols entries`"));
            }
            let dims = (
                parse_usize(fields[0], lineno)?,
                parse_usize(fields[1], lineno)?,
                parse_usize(fields[2], lineno)?,
            );
            if symmetry == Symmetry::Symmetric && dims.0 != dims.1 {
                return Err(parse_err(lineno, "symmetric matrix must be square"));
            }
            triples.reserve(dims.2);
            size = Some(dims);
            continue;
        };
        if fields.len() != 3 {
            return Err(parse_err(lineno, "entry needs `row col value`"));
        }
        let i = parse_usize(fields[0], lineno)?;
        let j = parse_usize(fields[1], lineno)?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(lineno, &format!("index ({i}, {j}) outside {rows}x{cols}")));
        }
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, &format!("bad value `{}`", fields[2])))?;
        if triples.len() >= nnz {
            return Err(parse_err(lineno, &format!("more than the declared {nnz} entries")));
        }
        triples.push(Triple(i - 1, j - 1, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triples.push(Triple(j - 1, i - 1, v));
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let stored = match symmetry {
        Symmetry::General => triples.len(),
        Symmetry::Symmetric => triples.iter().filter(|t| t.0 >= t.1).count(),
    };
    if stored != nnz {
        return Err(parse_err(1, &format!("declared {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triples(rows, cols, &triples)
}

fn parse_banner(banner: &str) -> Result<Symmetry> {
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if words[2] != "coordinate" {
        return Err(Error::Unsupported(format!("Matrix Market format `{}`", words[2])));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(Error::Unsupported(format!("Matrix Market field `{}`", words[3])));
    }
    match words[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(Error::Unsupported(format!("Matrix Market symmetry `{other}`"))),
    }
}

/// Writes `general` coordinate format with shortest round-trip values.
pub fn write_mtx(path: &Path, a: &SparseMatrix) -> Result<()> {
    write_text(path, &format_mtx(a))
}

pub fn format_mtx(a: &SparseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for Triple(i, j, v) in a.triples() {
        let _ = writeln!(out, "{} {} {v:e}", i + 1, j + 1);
    }
    out
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("expected a nonnegative integer, got `{s}`")))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.to_string(),
    }
}
