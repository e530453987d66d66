//! JSON problem manifests.
//!
//! Matrices are either inline arrays of `[row, col, value]` triples
//! (0-based) or paths to Matrix Market files relative to the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::problem::{LinearProgram, Problem, StronglyConvexQP};
use crate::sparse::{SparseMatrix, Triple};

use super::{read_text, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lp,
    Scqp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Triples(Vec<Triple>),
    /// Matrix Market file, relative to the manifest's directory.
    File(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Known optimal point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    /// Known equality multiplier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// On-disk description of an LP or SCQP.
///
/// An SCQP gives `Q` directly or as a `q × n` factor `B` with
/// `Q = BᵀB + q_shift·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemManifest {
    #[serde(rename = "type")]
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(rename = "A")]
    pub a: MatrixSource,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q_matrix: Option<MatrixSource>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<MatrixSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
}

impl ProblemManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    /// Inline manifest for `problem`; `Q` is stored as its nonzero entries.
    pub fn from_problem(problem: &Problem) -> Self {
        match problem {
            Problem::Lp(lp) => Self {
                kind: ProblemKind::Lp,
                m: lp.m(),
                n: lp.n(),
                q: None,
                a: MatrixSource::Triples(lp.a().triples()),
                b: lp.b().to_vec(),
                c: Some(lp.c().to_vec()),
                q_matrix: None,
                factor: None,
                q_shift: None,
                r: None,
                metadata: Metadata::default(),
            },
            Problem::Scqp(qp) => Self {
                kind: ProblemKind::Scqp,
                m: qp.m(),
                n: qp.n(),
                q: None,
                a: MatrixSource::Triples(qp.a().triples()),
                b: qp.b().to_vec(),
                c: None,
                q_matrix: Some(MatrixSource::Triples(
                    SparseMatrix::from_dense(qp.q()).triples(),
                )),
                factor: None,
                q_shift: None,
                r: Some(qp.r().to_vec()),
                metadata: Metadata::default(),
            },
        }
    }

    /// Replaces `Q` by the factor form `BᵀB + shift·I`.
    pub fn with_factor(mut self, b: &SparseMatrix, shift: f64) -> Self {
        self.q = Some(b.nrows());
        self.q_matrix = None;
        self.factor = Some(MatrixSource::Triples(b.triples()));
        self.q_shift = Some(shift);
        self
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Validates the payload and builds the problem. Matrix files are
    /// resolved against `base_dir`.
    pub fn to_problem(&self, base_dir: &Path) -> Result<Problem> {
        let (m, n) = (self.m, self.n);
        if m == 0 || n == 0 {
            return Err(schema("m", "m and n must be positive"));
        }
        let a = load_matrix(&self.a, "A", m, n, base_dir)?;
        check_len("b", &self.b, m, "m")?;
        match self.kind {
            ProblemKind::Lp => {
                for (field, present) in [
                    ("Q", self.q_matrix.is_some()),
                    ("B", self.factor.is_some()),
                    ("r", self.r.is_some()),
                    ("q", self.q.is_some()),
                    ("q_shift", self.q_shift.is_some()),
                ] {
                    if present {
                        return Err(schema(field, "not allowed for an lp manifest"));
                    }
                }
                let c = self.c.as_ref().ok_or_else(|| schema("c", "required for an lp manifest"))?;
                check_len("c", c, n, "n")?;
                Ok(Problem::Lp(LinearProgram::new(a, self.b.clone(), c.clone())?))
            }
            ProblemKind::Scqp => {
                if self.c.is_some() {
                    return Err(schema("c", "not allowed for an scqp manifest"));
                }
                let r = self.r.as_ref().ok_or_else(|| schema("r", "required for an scqp manifest"))?;
                check_len("r", r, n, "n")?;
                let q = self.hessian(base_dir)?;
                StronglyConvexQP::new(q, a, r.clone(), self.b.clone())
                    .map(Problem::Scqp)
                    .map_err(|e| match e {
                        Error::NotPositiveDefinite { .. } | Error::NotSymmetric(_) => {
                            schema(if self.factor.is_some() { "B" } else { "Q" }, &e.to_string())
                        }
                        other => other,
                    })
            }
        }
    }

    fn hessian(&self, base_dir: &Path) -> Result<DMatrix<f64>> {
        let n = self.n;
        match (&self.q_matrix, &self.factor) {
            (Some(_), Some(_)) => Err(schema("B", "give either Q or B, not both")),
            (None, None) => Err(schema("Q", "required for an scqp manifest (or B)")),
            (Some(src), None) => {
                if self.q.is_some() || self.q_shift.is_some() {
                    return Err(schema("q", "q and q_shift only apply to the factor form"));
                }
                Ok(load_matrix(src, "Q", n, n, base_dir)?.to_dense())
            }
            (None, Some(src)) => {
                let rows = self.q.ok_or_else(|| schema("q", "required with B"))?;
                let bm = load_matrix(src, "B", rows, n, base_dir)?;
                let shift = self.q_shift.unwrap_or(0.0);
                if !(shift >= 0.0 && shift.is_finite()) {
                    return Err(schema("q_shift", "must be finite and nonnegative"));
                }
                let mut h = DMatrix::zeros(n, n);
                bm.add_scaled_gram(1.0, &mut h);
                for i in 0..n {
                    h[(i, i)] += shift;
                }
                Ok(h)
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let value = serde_json::to_value(self)?;
        let mut out = String::new();
        write_readable(&value, 0, &mut out);
        out.push('\n');
        write_text(path, &out)
    }
}

pub fn read_manifest(path: &Path) -> Result<Problem> {
    let manifest = ProblemManifest::read(path)?;
    manifest.to_problem(path.parent().unwrap_or(Path::new(".")))
}

pub fn write_manifest(path: &Path, problem: &Problem) -> Result<()> {
    ProblemManifest::from_problem(problem).write(path)
}

fn load_matrix(
    src: &MatrixSource,
    field: &str,
    rows: usize,
    cols: usize,
    base_dir: &Path,
) -> Result<SparseMatrix> {
    match src {
        MatrixSource::Triples(triples) => {
            for (k, &Triple(i, j, _)) in triples.iter().enumerate() {
                if i >= rows || j >= cols {
                    return Err(schema(
                        &format!("{field}[{k}]"),
                        &format!("entry ({i}, {j}) outside the declared {rows}x{cols}"),
                    ));
                }
            }
            SparseMatrix::from_triples(rows, cols, triples)
        }
        MatrixSource::File(rel) => {
            let mat = super::read_mtx(&base_dir.join(rel))?;
            if mat.nrows() != rows || mat.ncols() != cols {
                return Err(schema(
                    field,
                    &format!(
                        "{rel} is {}x{}, manifest declares {rows}x{cols}",
                        mat.nrows(),
                        mat.ncols()
                    ),
                ));
            }
            Ok(mat)
        }
    }
}

fn check_len(field: &str, v: &[f64], expected: usize, dim: &str) -> Result<()> {
    if v.len() != expected {
        return Err(schema(
            field,
            &format!("expected {expected} entries ({dim}), got {}", v.len()),
        ));
    }
    Ok(())
}

fn schema(field: &str, message: &str) -> Error {
    Error::Schema {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Pretty JSON with arrays of scalars (and arrays of such arrays) on one
/// line each.
fn write_readable(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (k, (key, val)) in map.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), Value::String(key.clone()));
                write_readable(val, indent + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}}}", pad(indent));
        }
        Value::Array(items) if items.iter().any(|x| matches!(x, Value::Array(_))) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_readable(item, indent + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}]", pad(indent));
        }
        other => out.push_str(&other.to_string()),
    }
}
