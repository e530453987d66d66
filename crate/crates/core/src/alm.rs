//! Augmented Lagrangian outer loop for the strongly convex QP. Every
//! subproblem is solved exactly by the accelerated projected gradient warm
//! start followed by parametric active-set tracking.

use serde::{Deserialize, Serialize};

use crate::apg::{build_homotopy, estimate_lipschitz, filtrate, run_apg, ApgConfig};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist2, norm2, norm_inf};
use crate::pas::{track_with, PasOptions};
use crate::problem::{box_linear_term, check_box_kkt, check_scqp_kkt, BoxQP, KktReport, StronglyConvexQP};

const POWER_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmConfig {
    /// Penalty `β`; `10·(1 + ‖Q‖₂ estimate)` when `None`.
    pub beta: Option<f64>,
    /// Stop when `‖x^k − x^{k+1}‖₂ ≤ tol·(1 + ‖x^{k+1}‖₂)`.
    pub tol: f64,
    /// The step test only counts once `‖Ax − b‖₂ ≤ feas_tol·(1 + ‖b‖₂)`;
    /// infeasible problems therefore end at `max_outer`.
    pub feas_tol: f64,
    pub max_outer: usize,
    pub apg: ApgConfig,
    pub pas: PasOptions,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            beta: None,
            tol: 1e-10,
            feas_tol: 1e-8,
            max_outer: 100,
            apg: ApgConfig::default(),
            pas: PasOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmRecord {
    /// `‖Ax^k − b‖₂`
    pub eq_violation: f64,
    /// `‖x^k − x^{k−1}‖₂`
    pub step: f64,
    pub apg_iters: usize,
    pub pas_steps: usize,
    pub pas_committed: usize,
    pub pas_restarts: usize,
    pub objective: f64,
    /// Optimality residual of the subproblem solution.
    pub subproblem_kkt: f64,
    pub chol_flops: f64,
    pub qpoases_flops: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlmTrace {
    pub records: Vec<AlmRecord>,
}

impl AlmTrace {
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
pub struct AlmOutcome {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub status: SolveStatus,
    pub trace: AlmTrace,
    pub kkt: KktReport,
    pub beta: f64,
}

/// Exact solution of one box subproblem together with stage statistics.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub z: Vec<f64>,
    pub apg_iters: usize,
    pub track: crate::pas::TrackOutcome,
}

/// Two-stage exact solve of `min ½zᵀHz + fᵀz, z ≥ 0` from `start`.
pub fn solve_box_qp(
    p: &BoxQP,
    start: &[f64],
    lipschitz: f64,
    apg: &ApgConfig,
    pas: &PasOptions,
) -> Result<SubproblemSolution> {
    let first = run_apg(p, start, lipschitz, apg);
    let zhat = filtrate(&first.y, apg.filter_tol);
    let margin = apg.margin_for(p.f());
    let w = build_homotopy(p, &zhat, margin);
    let opts = PasOptions {
        margin: Some(margin),
        filter_tol: apg.filter_tol,
        ..*pas
    };
    let track = track_with(p, &w, &zhat, &opts)?;
    Ok(SubproblemSolution {
        z: track.z.clone(),
        apg_iters: first.iterations,
        track,
    })
}

/// Augmented Lagrangian solver with `H = Q + βAᵀA` assembled once; only the
/// linear term of the subproblem changes between outer iterations.
#[derive(Debug, Clone)]
pub struct AlmSolver {
    qp: StronglyConvexQP,
    beta: f64,
    hessian: BoxQP,
    lipschitz: f64,
    cfg: AlmConfig,
}

impl AlmSolver {
    pub fn new(qp: StronglyConvexQP, cfg: AlmConfig) -> Result<Self> {
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidArgument("ALM tolerance must be positive".into()));
        }
        let beta = match cfg.beta {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(b) => return Err(Error::InvalidArgument(format!("β must be positive, got {b}"))),
            None => default_beta(&qp),
        };
        let lambda0 = vec![0.0; qp.m()];
        let hessian = crate::problem::build_box_qp(&qp, beta, &lambda0)?;
        let lipschitz = cfg
            .apg
            .lipschitz
            .unwrap_or_else(|| estimate_lipschitz(hessian.h(), POWER_ITERS));
        Ok(Self {
            qp,
            beta,
            hessian,
            lipschitz,
            cfg,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn qp(&self) -> &StronglyConvexQP {
        &self.qp
    }

    /// Same Hessian, new linear objective term `r`.
    pub fn set_linear_term(&mut self, r: Vec<f64>) -> Result<()> {
        self.qp = self.qp.with_linear_term(r)?;
        Ok(())
    }

    /// Box subproblem for multiplier `λ`.
    pub fn subproblem(&self, lambda: &[f64]) -> Result<BoxQP> {
        check_dim("λ", self.qp.m(), lambda.len())?;
        self.hessian
            .with_linear_term(box_linear_term(&self.qp, self.beta, lambda))
    }

    pub fn solve(&self, x0: &[f64], lambda0: &[f64]) -> Result<AlmOutcome> {
        check_dim("x0", self.qp.n(), x0.len())?;
        check_dim("λ0", self.qp.m(), lambda0.len())?;
        let mut x = x0.to_vec();
        let mut lambda = lambda0.to_vec();
        let mut trace = AlmTrace::default();
        let mut status = SolveStatus::MaxIter;

        for k in 1..=self.cfg.max_outer {
            let p = self.subproblem(&lambda)?;
            let sub = solve_box_qp(&p, &x, self.lipschitz, &self.cfg.apg, &self.cfg.pas)
                .map_err(|e| Error::Subproblem {
                    iteration: k,
                    source: Box::new(e),
                })?;
            let x_new = sub.z;

            let ax = self.qp.a().mul_vec(&x_new);
            let residual: Vec<f64> = ax.iter().zip(self.qp.b()).map(|(a, b)| a - b).collect();
            for (l, r) in lambda.iter_mut().zip(&residual) {
                *l -= self.beta * r;
            }
            let step = dist2(&x, &x_new);
            let eq_violation = norm2(&residual);
            trace.records.push(AlmRecord {
                eq_violation,
                step,
                apg_iters: sub.apg_iters,
                pas_steps: sub.track.steps,
                pas_committed: sub.track.committed,
                pas_restarts: sub.track.restarts,
                objective: self.qp.objective(&x_new),
                subproblem_kkt: check_box_kkt(&p, &x_new, 0.0).max_residual()
                    / (1.0 + norm_inf(p.f())),
                chol_flops: sub.track.chol_flops,
                qpoases_flops: sub.track.qpoases_flops,
            });
            x = x_new;
            if step <= self.cfg.tol * (1.0 + norm2(&x))
                && eq_violation <= self.cfg.feas_tol * (1.0 + norm2(self.qp.b()))
            {
                status = SolveStatus::Optimal;
                break;
            }
        }
        let kkt = check_scqp_kkt(&self.qp, &x, &lambda, 0.0);
        Ok(AlmOutcome {
            x,
            lambda,
            status,
            trace,
            kkt,
            beta: self.beta,
        })
    }
}

/// `10·(1 + ‖Q‖₂)` with the norm taken from the power-iteration bound.
pub fn default_beta(qp: &StronglyConvexQP) -> f64 {
    10.0 * (1.0 + estimate_lipschitz(qp.q(), POWER_ITERS))
}

/// Runs the augmented Lagrangian loop from `(x0, λ0)`.
pub fn alm_solve(
    qp: &StronglyConvexQP,
    x0: &[f64],
    lambda0: &[f64],
    cfg: &AlmConfig,
) -> Result<AlmOutcome> {
    AlmSolver::new(qp.clone(), *cfg)?.solve(x0, lambda0)
}
