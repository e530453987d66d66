//! File formats: JSON problem manifests, Matrix Market matrices, an MPS
//! reader with standard-form conversion, and JSON solve results.

mod manifest;
mod mps;
mod mtx;
mod result;

use std::path::Path;

use crate::error::{Error, Result};

pub use manifest::{
    read_manifest, write_manifest, MatrixSource, Metadata, ProblemKind, ProblemManifest,
};
pub use mps::{parse_mps, read_mps, MpsModel, StandardFormMap, VarMap};
pub use mtx::{format_mtx, parse_mtx, read_mtx, write_mtx};
pub use result::{read_result, write_result, Counters, ResultStatus, SolveResult};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
