//! First stage: Nesterov-accelerated projected gradient on the box QP, used
//! to guess the optimal support, followed by filtration and construction of
//! the homotopy shift `w` that makes the guess exactly optimal.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::linalg::{dist2, norm2, norm_inf, sym_mul_vec};
use crate::problem::BoxQP;
use nalgebra::DMatrix;

/// Tuning of the accelerated projected gradient stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApgConfig {
    /// Lipschitz bound `L ≥ ‖H‖₂`; estimated from `H` when `None`.
    pub lipschitz: Option<f64>,
    /// Number of previous iterates whose support size must agree (`S_max`).
    pub plateau_window: usize,
    /// Relative threshold `ε₁` in the support count `μ(y) = #{y_j > ε₁‖y‖}`.
    pub support_tol: f64,
    /// Relative step tolerance `ε₂`.
    pub step_tol: f64,
    /// Filtration threshold `η`.
    pub filter_tol: f64,
    /// Strict margin `δ` placed on the zero set; `1e−2·(1+‖f‖∞)` when `None`.
    pub margin: Option<f64>,
    /// Iteration cap; `10·n` when `None`.
    pub max_iters: Option<usize>,
}

impl Default for ApgConfig {
    fn default() -> Self {
        Self {
            lipschitz: None,
            plateau_window: 50,
            support_tol: 1e-6,
            step_tol: 1e-8,
            filter_tol: 1e-7,
            margin: None,
            max_iters: None,
        }
    }
}

impl ApgConfig {
    pub fn margin_for(&self, f: &[f64]) -> f64 {
        self.margin.unwrap_or_else(|| default_margin(f))
    }

    pub fn max_iters_for(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(10 * n.max(1))
    }
}

pub fn default_margin(f: &[f64]) -> f64 {
    1e-2 * (1.0 + norm_inf(f))
}

/// Iterate of the accelerated scheme.
#[derive(Debug, Clone)]
pub struct ApgState {
    /// Extrapolated point `zˡ`.
    pub z: Vec<f64>,
    /// Latest projected point `yˡ`.
    pub y: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub theta: f64,
    pub iter: usize,
    /// Support counts of the last `S_max + 1` projected points.
    pub plateau_history: VecDeque<usize>,
}

impl ApgState {
    /// Starts from `y⁰ = [start]₊` with `z¹ = y⁰` and `θ₁ = 1`.
    pub fn new(start: &[f64]) -> Self {
        let y0: Vec<f64> = start.iter().map(|v| v.max(0.0)).collect();
        Self {
            z: y0.clone(),
            y: y0.clone(),
            y_prev: y0,
            theta: 1.0,
            iter: 0,
            plateau_history: VecDeque::new(),
        }
    }
}

/// `μ_ε(y)`: number of entries strictly above `ε‖y‖`.
pub fn support_count(y: &[f64], eps: f64) -> usize {
    let thresh = norm2(y) * eps;
    y.iter().filter(|&&v| v - thresh > 0.0).count()
}

/// One accelerated step: projected gradient from `z`, momentum update, and
/// extrapolation.
pub fn apg_step(state: &mut ApgState, p: &BoxQP, lipschitz: f64, cfg: &ApgConfig) {
    let hz = sym_mul_vec(p.h(), &state.z);
    let inv_l = 1.0 / lipschitz;
    let y_new: Vec<f64> = state
        .z
        .iter()
        .zip(hz.iter().zip(p.f()))
        .map(|(zj, (hj, fj))| (zj - inv_l * (hj + fj)).max(0.0))
        .collect();
    let theta_next = next_theta(state.theta);
    let momentum = (state.theta - 1.0) / theta_next;
    state.z = y_new
        .iter()
        .zip(&state.y)
        .map(|(yn, yo)| yn + momentum * (yn - yo))
        .collect();
    state.y_prev = std::mem::replace(&mut state.y, y_new);
    state.theta = theta_next;
    state.iter += 1;

    state
        .plateau_history
        .push_back(support_count(&state.y, cfg.support_tol));
    while state.plateau_history.len() > cfg.plateau_window + 1 {
        state.plateau_history.pop_front();
    }
}

/// `θ_{l+1} = (1 + √(1 + 4θ_l²)) / 2`
pub fn next_theta(theta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SupportPlateau,
    SmallStep,
    IterationCap,
}

/// Checks the plateau, relative-step and iteration-cap criteria, in that
/// order. A zero iterate with a zero step counts as a small step.
pub fn should_terminate(state: &ApgState, cfg: &ApgConfig, max_iters: usize) -> Option<StopReason> {
    if state.iter == 0 {
        return None;
    }
    let hist = &state.plateau_history;
    if hist.len() == cfg.plateau_window + 1 {
        let last = *hist.back().unwrap();
        if hist.iter().all(|&c| c == last) {
            return Some(StopReason::SupportPlateau);
        }
    }
    let step = dist2(&state.y, &state.y_prev);
    let size = norm2(&state.y);
    let small = if size == 0.0 {
        step == 0.0
    } else {
        step / size < cfg.step_tol
    };
    if small {
        return Some(StopReason::SmallStep);
    }
    if state.iter >= max_iters {
        return Some(StopReason::IterationCap);
    }
    None
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
}

/// Runs the accelerated scheme from `start` until a stopping criterion fires.
pub fn run_apg(p: &BoxQP, start: &[f64], lipschitz: f64, cfg: &ApgConfig) -> ApgOutcome {
    let max_iters = cfg.max_iters_for(p.n());
    let mut state = ApgState::new(start);
    loop {
        apg_step(&mut state, p, lipschitz, cfg);
        if let Some(reason) = should_terminate(&state, cfg, max_iters) {
            return ApgOutcome {
                y: state.y,
                iterations: state.iter,
                reason,
            };
        }
    }
}

/// Upper bound on `‖H‖₂` for symmetric positive definite `H`.
///
/// Power iteration whose Rayleigh quotient is inflated by 1%; if it has not
/// settled within `iters` steps the max-row-sum bound is returned instead.
pub fn estimate_lipschitz(h: &DMatrix<f64>, iters: usize) -> f64 {
    let n = h.nrows();
    if n == 0 {
        return 1.0;
    }
    let row_sum_bound = (0..n)
        .map(|i| h.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);

    let mut v: Vec<f64> = (0..n)
        .map(|j| 1.0 + ((j * 7919) % 97) as f64 / 97.0)
        .collect();
    let scale = norm2(&v);
    v.iter_mut().for_each(|x| *x /= scale);

    let mut estimate = 0.0;
    for _ in 0..iters {
        let hv = sym_mul_vec(h, &v);
        let rayleigh: f64 = hv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = norm2(&hv);
        if norm == 0.0 {
            break;
        }
        let converged = (rayleigh - estimate).abs() <= 1e-9 * rayleigh.abs();
        estimate = rayleigh;
        v = hv.into_iter().map(|x| x / norm).collect();
        if converged {
            return 1.01 * estimate;
        }
    }
    row_sum_bound.max(1.01 * estimate)
}

/// `ẑ_j = y_j` if `y_j ≥ η‖y‖`, else 0.
pub fn filtrate(y: &[f64], eta: f64) -> Vec<f64> {
    let thresh = eta * norm2(y);
    y.iter()
        .map(|&v| if v >= thresh { v } else { 0.0 })
        .collect()
}

/// Gradient shift `w` that makes `ẑ` the exact solution of
/// `min ½zᵀHz + (f+w)ᵀz, z ≥ 0`.
///
/// On the support `w_j = −(Hẑ + f)_j`; the whole zero set shares
/// `ξ = −min_{ẑ_j=0} (Hẑ + f)_j + δ`, so its shifted gradients are at
/// least `δ`. An empty zero set leaves `ξ` unused.
pub fn build_homotopy(p: &BoxQP, zhat: &[f64], delta: f64) -> Vec<f64> {
    assert_eq!(zhat.len(), p.n());
    let g = p.gradient(zhat);
    let min_zero_grad = zhat
        .iter()
        .zip(&g)
        .filter(|(z, _)| **z == 0.0)
        .map(|(_, g)| *g)
        .fold(f64::INFINITY, f64::min);
    let xi = if min_zero_grad.is_finite() {
        -min_zero_grad + delta
    } else {
        0.0
    };
    zhat.iter()
        .zip(&g)
        .map(|(&z, &gj)| if z > 0.0 { -gj } else { xi })
        .collect()
}
