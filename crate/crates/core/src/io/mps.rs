//! MPS reader (fixed or free layout) with conversion to `Ax = b, x ≥ 0`.
//!
//! Supported: NAME, ROWS (N, E, L, G), COLUMNS, RHS, BOUNDS (UP, LO, FX,
//! FR, MI, PL), ENDATA. Anything else is rejected rather than skipped.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::LinearProgram;
use crate::sparse::{SparseMatrix, Triple};

use super::read_text;

/// How an original variable is expressed in standard-form columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarMap {
    /// `x = offset + x_std[col]`
    Shifted { col: usize, offset: f64 },
    /// `x = upper − x_std[col]`
    Reflected { col: usize, upper: f64 },
    /// `x = x_std[pos] − x_std[neg]`
    Split { pos: usize, neg: usize },
    /// Fixed variable, eliminated from the standard form.
    Fixed { value: f64 },
}

/// Record of the standard-form conversion, used to map solutions back.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormMap {
    pub var_names: Vec<String>,
    pub vars: Vec<VarMap>,
    /// Names of the standard-form rows: the E/L/G rows in file order, then one
    /// `<column>.UP` row per variable with two finite bounds.
    pub row_names: Vec<String>,
    /// Slack (L rows and upper bounds) or surplus (G rows) columns.
    pub slack_count: usize,
    /// Added to `cᵀx_std` to obtain the original objective.
    pub objective_offset: f64,
    /// Extra N rows beyond the objective, which are ignored.
    pub dropped_rows: Vec<String>,
}

impl StandardFormMap {
    /// Original variables from a standard-form point.
    pub fn recover(&self, x: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| match *v {
                VarMap::Shifted { col, offset } => offset + x[col],
                VarMap::Reflected { col, upper } => upper - x[col],
                VarMap::Split { pos, neg } => x[pos] - x[neg],
                VarMap::Fixed { value } => value,
            })
            .collect()
    }

    pub fn original_objective(&self, lp: &LinearProgram, x: &[f64]) -> f64 {
        lp.objective(x) + self.objective_offset
    }
}

#[derive(Debug, Clone)]
pub struct MpsModel {
    pub name: String,
    pub lp: LinearProgram,
    pub map: StandardFormMap,
}

pub fn read_mps(path: &Path) -> Result<MpsModel> {
    let text = read_text(path)?;
    parse_mps(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    E,
    L,
    G,
}

#[derive(Default)]
struct Raw {
    name: String,
    objective: Option<String>,
    dropped: Vec<String>,
    rows: Vec<(String, RowKind)>,
    row_index: HashMap<String, usize>,
    cols: Vec<String>,
    col_index: HashMap<String, usize>,
    entries: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    objective_rhs: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lower_set: Vec<bool>,
}

enum RowRef {
    Objective,
    Dropped,
    Constraint(usize),
}

impl Raw {
    fn row(&self, name: &str, line: usize) -> Result<RowRef> {
        if self.objective.as_deref() == Some(name) {
            return Ok(RowRef::Objective);
        }
        if self.dropped.iter().any(|d| d == name) {
            return Ok(RowRef::Dropped);
        }
        self.row_index
            .get(name)
            .map(|&i| RowRef::Constraint(i))
            .ok_or_else(|| parse_err(line, &format!("unknown row `{name}`")))
    }

    fn col(&self, name: &str, line: usize) -> Result<usize> {
        self.col_index
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(line, &format!("unknown column `{name}`")))
    }
}

pub fn parse_mps(text: &str) -> Result<MpsModel> {
    let mut raw = Raw::default();
    let mut section = Section::None;
    let mut fixed: Option<bool> = None;

    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with([' ', '\t']) {
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default().to_ascii_uppercase();
            section = match keyword.as_str() {
                "NAME" => {
                    raw.name = words.next().unwrap_or_default().to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    return Err(Error::Unsupported(format!(
                        "MPS section `{other}` at line {lineno}"
                    )))
                }
            };
            continue;
        }
        if section == Section::End {
            return Err(parse_err(lineno, "data after ENDATA"));
        }
        let is_fixed = *fixed.get_or_insert_with(|| looks_fixed(line));
        let tokens = if is_fixed { fixed_tokens(line, section) } else { None }
            .unwrap_or_else(|| line.split_whitespace().map(str::to_string).collect());
        match section {
            Section::None => return Err(parse_err(lineno, "data line outside a section")),
            Section::Rows => rows_line(&mut raw, &tokens, lineno)?,
            Section::Columns => columns_line(&mut raw, &tokens, lineno)?,
            Section::Rhs => rhs_line(&mut raw, &tokens, lineno)?,
            Section::Bounds => bounds_line(&mut raw, &tokens, lineno)?,
            Section::End => unreachable!(),
        }
    }
    if section != Section::End {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }
    if raw.objective.is_none() {
        return Err(parse_err(1, "no objective (N) row"));
    }
    convert(raw)
}

/// First data line decides the layout: a row type in columns 2-3 and a name
/// of at most eight characters starting in column 5.
fn looks_fixed(line: &str) -> bool {
    let b = line.as_bytes();
    b.len() >= 5
        && b.len() <= 12
        && b[0] == b' '
        && b[1].is_ascii_alphabetic()
        && (b[2] == b' ' || b[2].is_ascii_alphabetic())
        && b[3] == b' '
        && b[4] != b' '
}

/// Splits a line by fixed-layout columns; `None` if text falls into a gap.
fn fixed_tokens(line: &str, section: Section) -> Option<Vec<String>> {
    if !line.is_ascii() {
        return None;
    }
    const FIELDS: [(usize, usize); 6] = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)];
    const GAPS: [(usize, usize); 6] = [(0, 1), (3, 4), (12, 14), (22, 24), (36, 39), (47, 49)];
    let b = line.as_bytes();
    let slice = |lo: usize, hi: usize| -> &str {
        let lo = lo.min(b.len());
        let hi = hi.min(b.len());
        line[lo..hi].trim()
    };
    if GAPS.iter().any(|&(lo, hi)| !slice(lo, hi).is_empty()) {
        return None;
    }
    let f: Vec<String> = FIELDS.iter().map(|&(lo, hi)| slice(lo, hi).to_string()).collect();
    let mut tokens = match section {
        Section::Rows => vec![f[0].clone(), f[1].clone()],
        Section::Columns | Section::Rhs => f[1..].to_vec(),
        _ => f[..4].to_vec(),
    };
    while tokens.last().is_some_and(|t| t.is_empty()) {
        tokens.pop();
    }
    let numeric = |k: usize| tokens.get(k).is_some_and(|t| t.parse::<f64>().is_ok());
    let valid = match section {
        Section::Rows => tokens.len() == 2,
        Section::Columns | Section::Rhs => {
            (tokens.len() == 3 || tokens.len() == 5)
                && numeric(2)
                && (tokens.len() == 3 || numeric(4))
        }
        _ => match tokens.len() {
            4 => numeric(3),
            3 => matches!(tokens[0].to_ascii_uppercase().as_str(), "FR" | "MI" | "PL"),
            _ => false,
        },
    };
    valid.then_some(tokens)
}

fn rows_line(raw: &mut Raw, t: &[String], line: usize) -> Result<()> {
    if t.len() != 2 {
        return Err(parse_err(line, "ROWS entry needs `type name`"));
    }
    let name = t[1].clone();
    if raw.row_index.contains_key(&name)
        || raw.objective.as_ref() == Some(&name)
        || raw.dropped.contains(&name)
    {
        return Err(parse_err(line, &format!("duplicate row name `{name}`")));
    }
    let kind = match t[0].to_ascii_uppercase().as_str() {
        "N" => {
            if raw.objective.is_none() {
                raw.objective = Some(name);
            } else {
                raw.dropped.push(name);
            }
            return Ok(());
        }
        "E" => RowKind::E,
        "L" => RowKind::L,
        "G" => RowKind::G,
        other => return Err(parse_err(line, &format!("unknown row type `{other}`"))),
    };
    raw.row_index.insert(name.clone(), raw.rows.len());
    raw.rows.push((name, kind));
    raw.rhs.push(0.0);
    Ok(())
}

fn columns_line(raw: &mut Raw, t: &[String], line: usize) -> Result<()> {
    if t.iter().any(|s| s.eq_ignore_ascii_case("'MARKER'")) {
        return Err(Error::Unsupported(format!("integer markers at line {line}")));
    }
    if t.len() != 3 && t.len() != 5 {
        return Err(parse_err(line, "COLUMNS entry needs `column row value [row value]`"));
    }
    let j = match raw.col_index.get(&t[0]) {
        Some(&j) => j,
        None => {
            let j = raw.cols.len();
            raw.col_index.insert(t[0].clone(), j);
            raw.cols.push(t[0].clone());
            raw.entries.push(Vec::new());
            raw.cost.push(0.0);
            raw.lower.push(0.0);
            raw.upper.push(f64::INFINITY);
            raw.lower_set.push(false);
            j
        }
    };
    for pair in t[1..].chunks(2) {
        let v = parse_num(&pair[1], line)?;
        match raw.row(&pair[0], line)? {
            RowRef::Objective => raw.cost[j] += v,
            RowRef::Dropped => {}
            RowRef::Constraint(i) => {
                if raw.entries[j].iter().any(|&(r, _)| r == i) {
                    return Err(parse_err(
                        line,
                        &format!("duplicate entry for column `{}` in row `{}`", t[0], pair[0]),
                    ));
                }
                raw.entries[j].push((i, v));
            }
        }
    }
    Ok(())
}

fn rhs_line(raw: &mut Raw, t: &[String], line: usize) -> Result<()> {
    // The RHS set name is optional in free layout.
    let pairs = match t.len() {
        2 | 4 => t,
        3 | 5 => &t[1..],
        _ => return Err(parse_err(line, "RHS entry needs `[set] row value [row value]`")),
    };
    for pair in pairs.chunks(2) {
        let v = parse_num(&pair[1], line)?;
        match raw.row(&pair[0], line)? {
            RowRef::Objective => raw.objective_rhs = v,
            RowRef::Dropped => {}
            RowRef::Constraint(i) => raw.rhs[i] = v,
        }
    }
    Ok(())
}

fn bounds_line(raw: &mut Raw, t: &[String], line: usize) -> Result<()> {
    let kind = t
        .first()
        .map(|s| s.to_ascii_uppercase())
        .unwrap_or_default();
    let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX");
    let (col, value) = match (needs_value, t.len()) {
        (true, 4) => (&t[2], Some(parse_num(&t[3], line)?)),
        (true, 3) => (&t[1], Some(parse_num(&t[2], line)?)),
        (false, 3) => (&t[2], None),
        (false, 2) => (&t[1], None),
        _ => return Err(parse_err(line, "BOUNDS entry needs `type [set] column [value]`")),
    };
    let j = raw.col(col, line)?;
    match (kind.as_str(), value) {
        ("UP", Some(v)) => {
            raw.upper[j] = v;
            if v < 0.0 && !raw.lower_set[j] {
                raw.lower[j] = f64::NEG_INFINITY;
            }
        }
        ("LO", Some(v)) => {
            raw.lower[j] = v;
            raw.lower_set[j] = true;
        }
        ("FX", Some(v)) => {
            raw.lower[j] = v;
            raw.upper[j] = v;
            raw.lower_set[j] = true;
        }
        ("FR", None) => {
            raw.lower[j] = f64::NEG_INFINITY;
            raw.upper[j] = f64::INFINITY;
            raw.lower_set[j] = true;
        }
        ("MI", None) => {
            raw.lower[j] = f64::NEG_INFINITY;
            raw.lower_set[j] = true;
        }
        ("PL", None) => raw.upper[j] = f64::INFINITY,
        (other, _) => {
            return Err(Error::Unsupported(format!("bound type `{other}` at line {line}")))
        }
    }
    Ok(())
}

fn convert(raw: Raw) -> Result<MpsModel> {
    let m0 = raw.rows.len();
    let mut b = raw.rhs.clone();
    let mut offset = -raw.objective_rhs;
    let mut c = Vec::new();
    let mut triples = Vec::new();
    let mut vars = Vec::with_capacity(raw.cols.len());
    // (variable, column, u − l) for variables with two finite bounds
    let mut boxed = Vec::new();

    let push_col = |sign: f64, j: usize, c: &mut Vec<f64>, triples: &mut Vec<Triple>| {
        let col = c.len();
        c.push(sign * raw.cost[j]);
        for &(i, v) in &raw.entries[j] {
            triples.push(Triple(i, col, sign * v));
        }
        col
    };

    for j in 0..raw.cols.len() {
        let (l, u) = (raw.lower[j], raw.upper[j]);
        if l > u {
            return Err(Error::InvalidArgument(format!(
                "column `{}` has lower bound {l} above upper bound {u}",
                raw.cols[j]
            )));
        }
        let shift = |value: f64, b: &mut Vec<f64>, offset: &mut f64| {
            for &(i, v) in &raw.entries[j] {
                b[i] -= v * value;
            }
            *offset += raw.cost[j] * value;
        };
        let map = if l.is_finite() && l == u {
            shift(l, &mut b, &mut offset);
            VarMap::Fixed { value: l }
        } else if l.is_finite() {
            shift(l, &mut b, &mut offset);
            let col = push_col(1.0, j, &mut c, &mut triples);
            if u.is_finite() {
                boxed.push((j, col, u - l));
            }
            VarMap::Shifted { col, offset: l }
        } else if u.is_finite() {
            shift(u, &mut b, &mut offset);
            VarMap::Reflected {
                col: push_col(-1.0, j, &mut c, &mut triples),
                upper: u,
            }
        } else {
            let pos = push_col(1.0, j, &mut c, &mut triples);
            let neg = push_col(-1.0, j, &mut c, &mut triples);
            VarMap::Split { pos, neg }
        };
        vars.push(map);
    }

    let mut row_names: Vec<String> = raw.rows.iter().map(|(name, _)| name.clone()).collect();
    let mut slack_count = 0;
    for (i, (_, kind)) in raw.rows.iter().enumerate() {
        let sign = match kind {
            RowKind::E => continue,
            RowKind::L => 1.0,
            RowKind::G => -1.0,
        };
        triples.push(Triple(i, c.len(), sign));
        c.push(0.0);
        slack_count += 1;
    }
    for (k, &(j, col, width)) in boxed.iter().enumerate() {
        let row = m0 + k;
        row_names.push(format!("{}.UP", raw.cols[j]));
        b.push(width);
        triples.push(Triple(row, col, 1.0));
        triples.push(Triple(row, c.len(), 1.0));
        c.push(0.0);
        slack_count += 1;
    }

    let a = SparseMatrix::from_triples(row_names.len(), c.len(), &triples)?;
    let lp = LinearProgram::new(a, b, c)?;
    Ok(MpsModel {
        name: raw.name,
        lp,
        map: StandardFormMap {
            var_names: raw.cols,
            vars,
            row_names,
            slack_count,
            objective_offset: offset,
            dropped_rows: raw.dropped,
        },
    })
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, &format!("bad number `{s}`")))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.to_string(),
    }
}
