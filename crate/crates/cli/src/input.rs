use std::path::Path;

use anyhow::{bail, Context, Result};
use qpas_core::io::{read_mps, ProblemKind, ProblemManifest, StandardFormMap};
use qpas_core::Problem;

/// A problem read from disk, with what is needed to report on it.
pub struct Loaded {
    pub name: String,
    pub problem: Problem,
    /// Present for MPS input; solutions live in the standard-form space.
    pub map: Option<StandardFormMap>,
    /// Known optimum from the manifest metadata.
    pub reference: Option<f64>,
}

impl Loaded {
    pub fn kind(&self) -> ProblemKind {
        match self.problem {
            Problem::Lp(_) => ProblemKind::Lp,
            Problem::Scqp(_) => ProblemKind::Scqp,
        }
    }

    pub fn objective_offset(&self) -> f64 {
        self.map.as_ref().map_or(0.0, |m| m.objective_offset)
    }
}

fn is_mps(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mps"))
}

/// Reads a JSON manifest or, by extension, an MPS file.
pub fn load(path: &Path, expected: Option<ProblemKind>) -> Result<Loaded> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem").to_string();
    let loaded = if is_mps(path) {
        let model = read_mps(path).with_context(|| format!("reading {}", path.display()))?;
        Loaded {
            name: if model.name.is_empty() { stem } else { model.name },
            problem: Problem::Lp(model.lp),
            map: Some(model.map),
            reference: None,
        }
    } else {
        let manifest =
            ProblemManifest::read(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let problem = manifest
            .to_problem(base)
            .with_context(|| format!("building problem from {}", path.display()))?;
        Loaded {
            name: manifest.metadata.name.clone().unwrap_or(stem),
            problem,
            map: None,
            reference: manifest.metadata.optimum,
        }
    };
    if let Some(kind) = expected {
        if kind != loaded.kind() {
            bail!("{} holds an {:?} problem, not {:?}", path.display(), loaded.kind(), kind);
        }
    }
    Ok(loaded)
}

/// `zero` or `file:<path>`; the file holds a JSON array or a result object
/// with an `x` field.
pub fn start_point(spec: &str, n: usize) -> Result<Vec<f64>> {
    let x = if spec == "zero" {
        vec![0.0; n]
    } else if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
        let array = match &value {
            serde_json::Value::Object(obj) => obj.get("x").cloned().unwrap_or_default(),
            other => other.clone(),
        };
        serde_json::from_value::<Vec<f64>>(array)
            .with_context(|| format!("{path} must hold a number array or an object with \"x\""))?
    } else {
        bail!("start must be `zero` or `file:<path>`, got `{spec}`");
    };
    if x.len() != n {
        bail!("start point has {} entries, the problem has {n} variables", x.len());
    }
    Ok(x)
}
