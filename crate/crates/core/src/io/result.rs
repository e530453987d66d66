//! JSON solve results. Keys keep declaration order and every float is
//! written with 17 significant digits, so values round-trip exactly.

use std::path::Path;

use serde::ser::{Error as _, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::alm::{AlmOutcome, SolveStatus};
use crate::error::{Error, Result};
use crate::pg::PgOutcome;
use crate::problem::{LinearProgram, StronglyConvexQP};

use super::manifest::ProblemKind;
use super::{read_text, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Optimal,
    MaxIter,
    Error,
}

impl From<SolveStatus> for ResultStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => Self::Optimal,
            SolveStatus::MaxIter => Self::MaxIter,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub pg_iters: usize,
    pub alm_outer: usize,
    pub apg_total: usize,
    pub pas_steps_total: usize,
    #[serde(serialize_with = "sig17")]
    pub chol_model_flops: f64,
    #[serde(serialize_with = "sig17")]
    pub qpoases_model_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(rename = "type")]
    pub kind: ProblemKind,
    pub status: ResultStatus,
    #[serde(serialize_with = "sig17")]
    pub objective: f64,
    #[serde(serialize_with = "sig17")]
    pub eq_violation: f64,
    #[serde(serialize_with = "sig17")]
    pub kkt_stationarity: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub x: Vec<f64>,
    /// `y` for an LP, `λ` for an SCQP.
    #[serde(serialize_with = "sig17_vec")]
    pub dual: Vec<f64>,
    pub counters: Counters,
    #[serde(serialize_with = "sig17")]
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SolveResult {
    pub fn from_pg(lp: &LinearProgram, out: &PgOutcome, wall_ms: f64) -> Self {
        let t = &out.trace;
        Self {
            kind: ProblemKind::Lp,
            status: out.status.into(),
            objective: lp.objective(&out.x),
            eq_violation: lp.eq_violation(&out.x),
            kkt_stationarity: out.certificate.kkt.stationarity_residual,
            x: out.x.clone(),
            dual: out.y.clone(),
            counters: Counters {
                pg_iters: t.records.len(),
                alm_outer: t.alm_outer_total(),
                apg_total: t.apg_total(),
                pas_steps_total: t.pas_steps_total(),
                chol_model_flops: t.chol_flops(),
                qpoases_model_flops: t.qpoases_flops(),
            },
            wall_ms,
            message: None,
        }
    }

    pub fn from_alm(qp: &StronglyConvexQP, out: &AlmOutcome, wall_ms: f64) -> Self {
        let t = &out.trace;
        Self {
            kind: ProblemKind::Scqp,
            status: out.status.into(),
            objective: qp.objective(&out.x),
            eq_violation: out.kkt.eq_violation,
            kkt_stationarity: out.kkt.stationarity_residual,
            x: out.x.clone(),
            dual: out.lambda.clone(),
            counters: Counters {
                pg_iters: 0,
                alm_outer: t.records.len(),
                apg_total: t.apg_total(),
                pas_steps_total: t.pas_steps_total(),
                chol_model_flops: t.chol_flops(),
                qpoases_model_flops: t.qpoases_flops(),
            },
            wall_ms,
            message: None,
        }
    }

    /// Errors on the first non-finite value, naming its field.
    pub fn check_finite(&self) -> Result<()> {
        let scalars = [
            ("objective", self.objective),
            ("eq_violation", self.eq_violation),
            ("kkt_stationarity", self.kkt_stationarity),
            ("counters.chol_model_flops", self.counters.chol_model_flops),
            ("counters.qpoases_model_flops", self.counters.qpoases_model_flops),
            ("wall_ms", self.wall_ms),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        for (name, v) in [("x", &self.x), ("dual", &self.dual)] {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{k}]")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_result(result: &SolveResult, path: &Path) -> Result<()> {
    let mut text = result.to_json()?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_result(path: &Path) -> Result<SolveResult> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn raw17(v: f64) -> std::result::Result<Box<RawValue>, String> {
    if !v.is_finite() {
        return Err(format!("non-finite value {v}"));
    }
    RawValue::from_string(format!("{v:.16e}")).map_err(|e| e.to_string())
}

fn sig17<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    raw17(*v).map_err(S::Error::custom)?.serialize(s)
}

fn sig17_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&raw17(x).map_err(S::Error::custom)?)?;
    }
    seq.end()
}
