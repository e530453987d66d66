use std::time::Instant;

use anyhow::Result;
use clap::Args;
use qpas_core::io::{ResultStatus, SolveResult};
use qpas_core::{alm_solve, pg_solve, AlmConfig, PgConfig, Problem};

use crate::input::Loaded;

#[derive(Args, Clone, Debug)]
pub struct SolverOpts {
    /// Initial projected gradient step.
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    /// Augmented Lagrangian penalty; chosen from the problem when omitted.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Relative augmented Lagrangian step tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Projected gradient decrease tolerance; `1e-9·(1+|cᵀx0|)` when omitted.
    #[arg(long)]
    pub f_tol: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_pg: usize,
}

impl SolverOpts {
    fn alm(&self) -> AlmConfig {
        AlmConfig {
            beta: self.beta,
            tol: self.tol,
            ..AlmConfig::default()
        }
    }
}

/// Solves from `x0`; wall time covers the solver call only. MPS objectives
/// include the constant from the conversion.
pub fn run(loaded: &Loaded, opts: &SolverOpts, x0: &[f64]) -> Result<SolveResult> {
    let mut result = match &loaded.problem {
        Problem::Lp(lp) => {
            let cfg = PgConfig {
                alpha0: opts.alpha0,
                f_tol: opts.f_tol,
                max_pg: opts.max_pg,
                alm: opts.alm(),
                ..PgConfig::default()
            };
            let start = Instant::now();
            let out = pg_solve(lp, x0, &cfg)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            SolveResult::from_pg(lp, &out, ms)
        }
        Problem::Scqp(qp) => {
            let start = Instant::now();
            let out = alm_solve(qp, x0, &vec![0.0; qp.m()], &opts.alm())?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            SolveResult::from_alm(qp, &out, ms)
        }
    };
    result.objective += loaded.objective_offset();
    Ok(result)
}

pub fn exit_code(result: &SolveResult) -> u8 {
    match result.status {
        ResultStatus::Optimal => 0,
        ResultStatus::MaxIter => 2,
        ResultStatus::Error => 1,
    }
}
