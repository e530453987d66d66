//! Second stage: follows the piecewise-linear solution path of
//!
//! ```text
//! min ½zᵀHz + (f + t·w)ᵀz   s.t. z ≥ 0
//! ```
//!
//! from `t = 1`, where the warm start `ẑ` is exactly optimal, down to
//! `t = 0`. On each linear piece the work set `J` is fixed and
//!
//! ```text
//! z_J(t)        = u − t·v,   u = −H_JJ⁻¹ f_J,  v = H_JJ⁻¹ w_J
//! (Hz + f + tw)_Jc = ψ − t·φ,  ψ = H_{Jc,J} u + f_Jc,  φ = H_{Jc,J} v − w_Jc
//! ```
//!
//! A piece ends when an entry of `z_J` reaches zero (ratio `u_j / v_j` with
//! `v_j < 0`) or a zero-set gradient reaches zero (ratio `ψ_j / φ_j` with
//! `φ_j < 0`). Each work-set change is validated by a strict sign test on
//! the recomputed vectors before being committed.

use serde::{Deserialize, Serialize};

use crate::apg::{build_homotopy, default_margin, filtrate};
use crate::chol::{CholFactor, UpdateOp, WorkSet};
use crate::error::{Error, Result};
use crate::linalg::{column, norm_inf};
use crate::problem::{check_box_kkt, BoxQP};

/// Ratios at or below this are treated as `t ≤ 0`.
pub const RATIO_FLOOR: f64 = 1e-14;
/// Two event ratios within `TIE_REL · (1 + t)` are simultaneous.
pub const TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum PathEvent {
    /// `index` left the zero set.
    Add { index: usize },
    /// `index` dropped out of the work set.
    Remove { index: usize },
    Swap { removed: usize, added: usize },
    /// Simultaneous event where only the addition survived validation.
    AddOnly { added: usize, kept: usize },
    /// Simultaneous event where only the removal survived validation.
    RemoveOnly { removed: usize, skipped: usize },
    /// Candidate update failed validation; the work set is unchanged.
    Reject { index: usize },
    /// Tracking restarted from the current point with a doubled margin.
    Perturb,
    Finish,
}

impl PathEvent {
    pub fn is_commit(&self) -> bool {
        matches!(
            self,
            PathEvent::Add { .. }
                | PathEvent::Remove { .. }
                | PathEvent::Swap { .. }
                | PathEvent::AddOnly { .. }
                | PathEvent::RemoveOnly { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    #[serde(flatten)]
    pub event: PathEvent,
}

/// Next event candidates: `(index, ratio)` for the work set (a component
/// reaches zero) and for the zero set (a gradient reaches zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextBreakpoint {
    pub leave: Option<(usize, f64)>,
    pub enter: Option<(usize, f64)>,
}

impl NextBreakpoint {
    pub fn t_leave(&self) -> f64 {
        self.leave.map_or(f64::NEG_INFINITY, |(_, t)| t)
    }
    pub fn t_enter(&self) -> f64 {
        self.enter.map_or(f64::NEG_INFINITY, |(_, t)| t)
    }
}

#[derive(Debug, Clone)]
pub enum Advance {
    Continue,
    Finished(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Snapshot {
    factor: CholFactor,
    complement: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

/// Tracker state on the current linear piece.
#[derive(Debug, Clone)]
pub struct PasState {
    t: f64,
    factor: CholFactor,
    complement: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
    step_count: usize,
    log: Vec<Breakpoint>,
}

impl PasState {
    /// Starts at `t = 1` with `J = {j : ẑ_j > 0}` ordered by descending `ẑ_j`.
    ///
    /// Only `u` is obtained from the factor; `v` follows from
    /// `u − 1·v = ẑ_J`.
    pub fn init(p: &BoxQP, w: &[f64], zhat: &[f64]) -> Result<Self> {
        let n = p.n();
        crate::error::check_dim("w", n, w.len())?;
        crate::error::check_dim("ẑ", n, zhat.len())?;
        let shifted: Vec<f64> = p.f().iter().zip(w).map(|(f, w)| f + w).collect();
        let warm = p.with_linear_term(shifted)?;
        let report = check_box_kkt(&warm, zhat, 0.0);
        let scale = 1.0 + norm_inf(p.f()) + norm_inf(w);
        if !report.passes(1e-10 * scale) {
            return Err(Error::InvalidArgument(format!(
                "warm start is not optimal for the shifted problem (residual {:e})",
                report.max_residual()
            )));
        }

        let mut order: Vec<usize> = (0..n).filter(|&j| zhat[j] > 0.0).collect();
        order.sort_by(|&a, &b| zhat[b].total_cmp(&zhat[a]).then(a.cmp(&b)));
        let factor = CholFactor::factor_from_scratch(p.h(), WorkSet::new(order, n)?)?;

        let f_j: Vec<f64> = factor.workset().order().iter().map(|&j| p.f()[j]).collect();
        let u: Vec<f64> = factor.solve(&f_j).into_iter().map(|x| -x).collect();
        let v: Vec<f64> = u
            .iter()
            .zip(factor.workset().order())
            .map(|(uj, &j)| uj - zhat[j])
            .collect();
        let mut state = Self {
            t: 1.0,
            complement: factor.workset().complement(),
            factor,
            u,
            v,
            psi: Vec::new(),
            phi: Vec::new(),
            step_count: 0,
            log: Vec::new(),
        };
        state.update_complement_terms(p, w);
        Ok(state)
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn workset(&self) -> &WorkSet {
        self.factor.workset()
    }
    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn step_count(&self) -> usize {
        self.step_count
    }
    pub fn breakpoint_log(&self) -> &[Breakpoint] {
        &self.log
    }

    /// Full-length `z(t)` from the current piece's closed form.
    pub fn z_at(&self, t: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.workset().universe()];
        for (k, &j) in self.workset().order().iter().enumerate() {
            z[j] = self.u[k] - t * self.v[k];
        }
        z
    }

    /// `ψ − tφ`, the shifted gradient on the zero set.
    pub fn complement_gradient_at(&self, t: f64) -> Vec<f64> {
        self.psi
            .iter()
            .zip(&self.phi)
            .map(|(p, f)| p - t * f)
            .collect()
    }

    /// Largest event ratio below the current `t` in each family; ties go to
    /// the smallest index. Entries already across their boundary (ratio at or
    /// above `t`, which only roundoff or a rejected update produces) are
    /// reported at `t` itself.
    pub fn next_breakpoint(&self) -> NextBreakpoint {
        let pick = |best: &mut Option<(usize, f64)>, j: usize, r: f64| {
            let better = match *best {
                None => true,
                Some((bj, br)) => r > br || (r == br && j < bj),
            };
            if better {
                *best = Some((j, r));
            }
        };
        let mut leave = None;
        for (k, &j) in self.workset().order().iter().enumerate() {
            if self.v[k] < 0.0 {
                pick(&mut leave, j, (self.u[k] / self.v[k]).min(self.t));
            }
        }
        let mut enter = None;
        for (k, &j) in self.complement.iter().enumerate() {
            if self.phi[k] < 0.0 {
                pick(&mut enter, j, (self.psi[k] / self.phi[k]).min(self.t));
            }
        }
        NextBreakpoint { leave, enter }
    }

    /// Moves to the next breakpoint and applies the validated work-set
    /// update, or finishes with `z(0)` when no event lies in `(0, t)`.
    pub fn advance(&mut self, p: &BoxQP, w: &[f64]) -> Result<Advance> {
        self.step_count += 1;
        let next = self.next_breakpoint();
        let (t_leave, t_enter) = (next.t_leave(), next.t_enter());

        if t_leave <= RATIO_FLOOR && t_enter <= RATIO_FLOOR {
            let mut z = vec![0.0; p.n()];
            for (k, &j) in self.workset().order().iter().enumerate() {
                z[j] = self.u[k].max(0.0);
            }
            self.t = 0.0;
            self.push_log(PathEvent::Finish);
            return Ok(Advance::Finished(z));
        }

        let tie = TIE_REL * (1.0 + self.t);
        let event = match (next.leave, next.enter) {
            (Some((out, tl)), Some((inn, te)))
                if tl > RATIO_FLOOR && te > RATIO_FLOOR && (tl - te).abs() <= tie =>
            {
                self.t = tl.max(te);
                self.swap(p, w, out, inn)?
            }
            (Some((out, tl)), _) if tl > t_enter => {
                self.t = tl;
                self.leave(p, w, out)?
            }
            (_, Some((inn, te))) => {
                self.t = te;
                self.enter(p, w, inn)?
            }
            (Some((out, tl)), None) => {
                self.t = tl;
                self.leave(p, w, out)?
            }
            (None, None) => unreachable!("no candidates but t above floor"),
        };
        self.push_log(event);
        Ok(Advance::Continue)
    }

    fn leave(&mut self, p: &BoxQP, w: &[f64], out: usize) -> Result<PathEvent> {
        let saved = self.snapshot();
        self.factor.remove_index(p.h(), out)?;
        self.recompute(p, w);
        if self.phi_of(out).is_some_and(|g| g > 0.0) {
            Ok(PathEvent::Remove { index: out })
        } else {
            self.restore(saved);
            Ok(PathEvent::Reject { index: out })
        }
    }

    fn enter(&mut self, p: &BoxQP, w: &[f64], inn: usize) -> Result<PathEvent> {
        let saved = self.snapshot();
        self.factor.add_index(p.h(), inn)?;
        self.recompute(p, w);
        if self.v.last().is_some_and(|&s| s > 0.0) {
            Ok(PathEvent::Add { index: inn })
        } else {
            self.restore(saved);
            Ok(PathEvent::Reject { index: inn })
        }
    }

    fn swap(&mut self, p: &BoxQP, w: &[f64], out: usize, inn: usize) -> Result<PathEvent> {
        let saved = self.snapshot();
        self.factor.remove_index(p.h(), out)?;
        if let Err(e) = self.factor.add_index(p.h(), inn) {
            self.restore(saved);
            return Err(e);
        }
        self.recompute(p, w);
        let leave_ok = self.phi_of(out).is_some_and(|g| g > 0.0);
        let enter_ok = self.v.last().is_some_and(|&s| s > 0.0);
        match (leave_ok, enter_ok) {
            (true, true) => Ok(PathEvent::Swap {
                removed: out,
                added: inn,
            }),
            (false, true) => {
                self.restore(saved);
                self.factor.add_index(p.h(), inn)?;
                self.recompute(p, w);
                Ok(PathEvent::AddOnly {
                    added: inn,
                    kept: out,
                })
            }
            (true, false) => {
                self.restore(saved);
                self.factor.remove_index(p.h(), out)?;
                self.recompute(p, w);
                Ok(PathEvent::RemoveOnly {
                    removed: out,
                    skipped: inn,
                })
            }
            (false, false) => {
                self.restore(saved);
                Ok(PathEvent::Reject { index: out })
            }
        }
    }

    fn phi_of(&self, j: usize) -> Option<f64> {
        self.complement
            .binary_search(&j)
            .ok()
            .map(|k| self.phi[k])
    }

    /// Two solves with the updated factor, then the block product for the
    /// zero set.
    fn recompute(&mut self, p: &BoxQP, w: &[f64]) {
        let order = self.factor.workset().order();
        let f_j: Vec<f64> = order.iter().map(|&j| p.f()[j]).collect();
        let w_j: Vec<f64> = order.iter().map(|&j| w[j]).collect();
        self.u = self.factor.solve(&f_j).into_iter().map(|x| -x).collect();
        self.v = self.factor.solve(&w_j);
        self.complement = self.factor.workset().complement();
        self.update_complement_terms(p, w);
    }

    /// `[ψ, φ] = H_{Jc,J} [u, v] + [f_Jc, −w_Jc]`
    fn update_complement_terms(&mut self, p: &BoxQP, w: &[f64]) {
        let order = self.factor.workset().order();
        let h = p.h();
        let mut psi = Vec::with_capacity(self.complement.len());
        let mut phi = Vec::with_capacity(self.complement.len());
        for &j in &self.complement {
            let col = column(h, j);
            let (mut su, mut sv) = (0.0, 0.0);
            for (k, &i) in order.iter().enumerate() {
                su += col[i] * self.u[k];
                sv += col[i] * self.v[k];
            }
            psi.push(su + p.f()[j]);
            phi.push(sv - w[j]);
        }
        self.psi = psi;
        self.phi = phi;
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            factor: self.factor.clone(),
            complement: self.complement.clone(),
            u: self.u.clone(),
            v: self.v.clone(),
            psi: self.psi.clone(),
            phi: self.phi.clone(),
        }
    }

    /// Restores the piece but keeps the update counters of the attempt.
    fn restore(&mut self, s: Snapshot) {
        let attempted = std::mem::replace(&mut self.factor, s.factor);
        self.factor.carry_counters_from(&attempted);
        self.complement = s.complement;
        self.u = s.u;
        self.v = s.v;
        self.psi = s.psi;
        self.phi = s.phi;
    }

    fn push_log(&mut self, event: PathEvent) {
        self.log.push(Breakpoint { t: self.t, event });
    }
}

/// Settings for [`track_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PasOptions {
    /// Margin used when a restart rebuilds the homotopy (doubled each
    /// restart); `1e−2·(1+‖f‖∞)` when `None`.
    pub margin: Option<f64>,
    /// Filtration threshold applied to the restart point.
    pub filter_tol: f64,
    pub max_restarts: usize,
    /// Steps allowed per tracking attempt, as a multiple of `n`.
    pub step_cap_factor: usize,
}

impl Default for PasOptions {
    fn default() -> Self {
        Self {
            margin: None,
            filter_tol: 1e-7,
            max_restarts: 5,
            step_cap_factor: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackOutcome {
    pub z: Vec<f64>,
    pub log: Vec<Breakpoint>,
    /// Advance calls over all attempts.
    pub steps: usize,
    /// Committed work-set changes.
    pub committed: usize,
    pub rejects: usize,
    pub restarts: usize,
    pub ops: Vec<UpdateOp>,
    pub chol_flops: f64,
    pub qpoases_flops: f64,
}

/// Tracks the path with default options.
pub fn track(p: &BoxQP, w: &[f64], zhat: &[f64]) -> Result<TrackOutcome> {
    track_with(p, w, zhat, &PasOptions::default())
}

enum Attempt {
    Done(Vec<f64>),
    Stuck(Vec<f64>),
}

/// Tracks the solution path from `t = 1` to `t = 0` and returns the exact
/// solution of the box QP.
///
/// A repeated rejection at the same `t`, a degenerate factor update, or a
/// final point failing the optimality check restarts tracking from the
/// current point with a rebuilt homotopy and a doubled margin.
pub fn track_with(p: &BoxQP, w: &[f64], zhat: &[f64], opts: &PasOptions) -> Result<TrackOutcome> {
    let n = p.n();
    let cap = opts.step_cap_factor * n.max(1);
    let tol = 1e-9 * (1.0 + norm_inf(p.f()));
    let mut margin = opts.margin.unwrap_or_else(|| default_margin(p.f()));
    let mut w = w.to_vec();
    let mut zhat = zhat.to_vec();
    let mut out = TrackOutcome {
        z: Vec::new(),
        log: Vec::new(),
        steps: 0,
        committed: 0,
        rejects: 0,
        restarts: 0,
        ops: Vec::new(),
        chol_flops: 0.0,
        qpoases_flops: 0.0,
    };

    loop {
        let mut state = PasState::init(p, &w, &zhat)?;
        let attempt = run_attempt(&mut state, p, &w, cap);
        out.steps += state.step_count;
        out.log.extend_from_slice(state.breakpoint_log());
        out.ops.extend_from_slice(state.factor.ops());
        out.chol_flops += state.factor.flops();
        out.qpoases_flops += state.factor.qpoases_flops();
        let restart_from = match attempt? {
            Attempt::Done(z) => {
                if check_box_kkt(p, &z, 0.0).passes(tol) {
                    out.committed = out.log.iter().filter(|b| b.event.is_commit()).count();
                    out.rejects = out
                        .log
                        .iter()
                        .filter(|b| matches!(b.event, PathEvent::Reject { .. }))
                        .count();
                    out.z = z;
                    return Ok(out);
                }
                z
            }
            Attempt::Stuck(z) => z,
        };
        if out.restarts >= opts.max_restarts {
            return Err(Error::NonTermination { steps: out.steps });
        }
        out.restarts += 1;
        margin *= 2.0;
        let clipped: Vec<f64> = restart_from.iter().map(|v| v.max(0.0)).collect();
        zhat = filtrate(&clipped, opts.filter_tol);
        w = build_homotopy(p, &zhat, margin);
        out.log.push(Breakpoint {
            t: 1.0,
            event: PathEvent::Perturb,
        });
    }
}

fn run_attempt(state: &mut PasState, p: &BoxQP, w: &[f64], cap: usize) -> Result<Attempt> {
    loop {
        if state.step_count >= cap {
            return Err(Error::NonTermination {
                steps: state.step_count,
            });
        }
        let t_before = state.t;
        match state.advance(p, w) {
            Ok(Advance::Finished(z)) => return Ok(Attempt::Done(z)),
            Ok(Advance::Continue) => {}
            Err(Error::Degenerate { .. }) => return Ok(Attempt::Stuck(state.z_at(t_before))),
            Err(e) => return Err(e),
        }
        if let [.., prev, last] = state.breakpoint_log() {
            if let (PathEvent::Reject { index: a }, PathEvent::Reject { index: b }) =
                (prev.event, last.event)
            {
                if a == b && (prev.t - last.t).abs() <= RATIO_FLOOR {
                    return Ok(Attempt::Stuck(state.z_at(state.t)));
                }
            }
        }
    }
}
