//! Projected gradient outer loop for the standard-form LP. Each iteration
//! projects `x − αc` onto `{Ax = b, x ≥ 0}` with the augmented Lagrangian
//! solver, so the LP is reduced to a finite sequence of projections.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alm::{AlmConfig, AlmOutcome, AlmSolver, SolveStatus};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dist_inf;
use crate::problem::{check_lp_kkt, LinearProgram, LpCertificate, StronglyConvexQP};

/// Target for `‖βAᵀA‖₂` when the projection penalty is not given.
pub const PROJECTION_PENALTY_SCALE: f64 = 1e4;

/// Support threshold used when certifying the final LP point.
pub const CERTIFICATE_SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgConfig {
    pub alpha0: f64,
    /// Growth factor `ρ` in `α ← min(ρα, α_max)`.
    pub rho: f64,
    pub alpha_max: f64,
    /// Stop when `cᵀx^σ − cᵀx^{σ+1} ≤ f_tol`; `1e−9·(1+|cᵀx0|)` when `None`.
    pub f_tol: Option<f64>,
    pub max_pg: usize,
    pub alm: AlmConfig,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            rho: 2.0,
            alpha_max: 1e6,
            f_tol: None,
            max_pg: 1000,
            alm: AlmConfig::default(),
        }
    }
}

impl PgConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidArgument(format!("α0 must be positive, got {}", self.alpha0)));
        }
        if !(self.rho >= 1.0) {
            return Err(Error::InvalidArgument(format!("ρ must be at least 1, got {}", self.rho)));
        }
        if !(self.alpha_max >= self.alpha0) {
            return Err(Error::InvalidArgument("α_max must be at least α0".into()));
        }
        if let Some(t) = self.f_tol {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("f_tol must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgRecord {
    pub alpha: f64,
    /// `cᵀx^σ` before the projection.
    pub objective: f64,
    /// `cᵀx^σ − cᵀx^{σ+1}`
    pub decrease: f64,
    /// `‖x^{σ+1} − x^σ‖∞`
    pub moved: f64,
    pub eq_violation: f64,
    pub alm_outer: usize,
    pub alm_status: SolveStatus,
    pub apg_iters: usize,
    pub pas_steps: usize,
    pub chol_flops: f64,
    pub qpoases_flops: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PgTrace {
    pub records: Vec<PgRecord>,
}

impl PgTrace {
    pub fn alm_outer_total(&self) -> usize {
        self.records.iter().map(|r| r.alm_outer).sum()
    }
    pub fn apg_total(&self) -> usize {
        self.records.iter().map(|r| r.apg_iters).sum()
    }
    pub fn pas_steps_total(&self) -> usize {
        self.records.iter().map(|r| r.pas_steps).sum()
    }
    pub fn chol_flops(&self) -> f64 {
        self.records.iter().map(|r| r.chol_flops).sum()
    }
    pub fn qpoases_flops(&self) -> f64 {
        self.records.iter().map(|r| r.qpoases_flops).sum()
    }
}

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub x: Vec<f64>,
    /// Dual estimate `y = λ/α` from the last projection.
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub trace: PgTrace,
    pub certificate: LpCertificate,
}

/// Projection onto `{Ax = b, x ≥ 0}` with a prepared solver for `Q = I`.
#[derive(Debug, Clone)]
pub struct Projector {
    lp: LinearProgram,
    solver: AlmSolver,
}

impl Projector {
    /// Uses `cfg.beta` when given, otherwise [`projection_beta`].
    pub fn new(lp: &LinearProgram, cfg: AlmConfig) -> Result<Self> {
        let n = lp.n();
        let cfg = AlmConfig {
            beta: Some(cfg.beta.unwrap_or_else(|| projection_beta(lp))),
            ..cfg
        };
        let qp = StronglyConvexQP::new(
            DMatrix::identity(n, n),
            lp.a().clone(),
            vec![0.0; n],
            lp.b().to_vec(),
        )?;
        let solver = AlmSolver::new(qp, cfg)?;
        Ok(Self {
            lp: lp.clone(),
            solver,
        })
    }

    pub fn solver(&self) -> &AlmSolver {
        &self.solver
    }

    /// `argmin ½‖x′ − (x − αc)‖²` over the feasible set, warm-started from
    /// `x` and the multiplier guess `lambda0`.
    pub fn project(&mut self, x: &[f64], alpha: f64, lambda0: &[f64]) -> Result<AlmOutcome> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("α must be positive, got {alpha}")));
        }
        check_dim("x", self.lp.n(), x.len())?;
        let r: Vec<f64> = x
            .iter()
            .zip(self.lp.c())
            .map(|(xj, cj)| alpha * cj - xj)
            .collect();
        self.solver.set_linear_term(r)?;
        self.solver.solve(x, lambda0)
    }
}

/// `β = 10⁴/‖A‖₂²`, so that `βAᵀA` has spectral norm `10⁴` whatever the
/// scaling of `A`.
pub fn projection_beta(lp: &LinearProgram) -> f64 {
    let norm_sq = lp.a().spectral_norm_sq(500);
    if norm_sq > 0.0 {
        PROJECTION_PENALTY_SCALE / norm_sq
    } else {
        PROJECTION_PENALTY_SCALE
    }
}

/// One projected gradient step from a zero multiplier guess.
pub fn project_step(lp: &LinearProgram, x: &[f64], alpha: f64, cfg: &AlmConfig) -> Result<Vec<f64>> {
    let mut projector = Projector::new(lp, *cfg)?;
    let out = projector.project(x, alpha, &vec![0.0; lp.m()])?;
    if out.status != SolveStatus::Optimal {
        return Err(Error::NotConverged {
            stage: "augmented Lagrangian",
            iterations: out.trace.records.len(),
        });
    }
    Ok(out.x)
}

/// Projected gradient iterations from `x0` until the objective decrease
/// falls to `f_tol`.
///
/// When `x0` is infeasible the first projection only restores feasibility
/// and is exempt from the decrease test. A projection that does not
/// converge ends the run with [`SolveStatus::MaxIter`].
pub fn pg_solve(lp: &LinearProgram, x0: &[f64], cfg: &PgConfig) -> Result<PgOutcome> {
    cfg.validate()?;
    check_dim("x0", lp.n(), x0.len())?;
    let f_tol = cfg.f_tol.unwrap_or_else(|| 1e-9 * (1.0 + lp.objective(x0).abs()));
    let start_feasible = lp.eq_violation(x0) <= 1e-8 && x0.iter().all(|&v| v >= 0.0);
    let mut projector = Projector::new(lp, cfg.alm)?;

    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; lp.m()];
    let mut alpha = cfg.alpha0;
    let mut prev_alpha = cfg.alpha0;
    let mut trace = PgTrace::default();
    let mut status = SolveStatus::MaxIter;
    let mut y = vec![0.0; lp.m()];

    for sigma in 0..cfg.max_pg {
        let scale = alpha / prev_alpha;
        let guess: Vec<f64> = lambda.iter().map(|l| l * scale).collect();
        let out = projector
            .project(&x, alpha, &guess)
            .map_err(|e| Error::Subproblem {
                iteration: sigma + 1,
                source: Box::new(e),
            })?;
        let before = lp.objective(&x);
        let after = lp.objective(&out.x);
        let decrease = before - after;
        let moved = dist_inf(&x, &out.x);
        trace.records.push(PgRecord {
            alpha,
            objective: before,
            decrease,
            moved,
            eq_violation: lp.eq_violation(&out.x),
            alm_outer: out.trace.records.len(),
            alm_status: out.status,
            apg_iters: out.trace.apg_total(),
            pas_steps: out.trace.pas_steps_total(),
            chol_flops: out.trace.chol_flops(),
            qpoases_flops: out.trace.qpoases_flops(),
        });
        y = out.lambda.iter().map(|l| l / alpha).collect();
        x = out.x;
        lambda = out.lambda;
        if out.status != SolveStatus::Optimal {
            break;
        }
        let exempt = sigma == 0 && !start_feasible;
        if !exempt && (decrease <= f_tol || moved <= 1e-10) {
            status = SolveStatus::Optimal;
            break;
        }
        prev_alpha = alpha;
        alpha = (alpha * cfg.rho).min(cfg.alpha_max);
    }
    let certificate = check_lp_kkt(lp, &x, &y, CERTIFICATE_SUPPORT_TOL);
    Ok(PgOutcome {
        x,
        y,
        status,
        trace,
        certificate,
    })
}
