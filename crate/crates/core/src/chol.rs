//! Cholesky factor of a principal submatrix `H_JJ` that follows an ordered
//! work set through appends and arbitrary removals.
//!
//! New indices are always appended at the end of the order, which costs one
//! triangular solve. Removing the index at position `p` keeps the leading
//! `p` rows of the factor and refactors only the trailing block from its
//! Schur complement `H_{J₂J₂} − R₁₂ᵀR₁₂`, so removals near the end of the
//! order are cheap. Every update is recorded so the model flop counts of this
//! scheme and of a Givens-based comparator can be evaluated on the identical
//! operation sequence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative floor on Cholesky pivots, scaled by the largest diagonal of `H`.
pub const PIVOT_REL_FLOOR: f64 = 1e-13;

/// Ordered set of distinct indices into `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkSet {
    order: Vec<usize>,
    position: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl WorkSet {
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        let mut position = vec![ABSENT; n];
        for (p, &j) in order.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidArgument(format!("index {j} out of range {n}")));
            }
            if position[j] != ABSENT {
                return Err(Error::InvalidArgument(format!("duplicate index {j}")));
            }
            position[j] = p;
        }
        Ok(Self { order, position })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            order: Vec::new(),
            position: vec![ABSENT; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            position: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Size of the ground set `n`.
    pub fn universe(&self) -> usize {
        self.position.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.position.get(j).is_some_and(|&p| p != ABSENT)
    }

    pub fn position(&self, j: usize) -> Option<usize> {
        self.position.get(j).copied().filter(|&p| p != ABSENT)
    }

    /// Indices of `0..n` not in the set, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.universe()).filter(|&j| !self.contains(j)).collect()
    }

    fn push(&mut self, j: usize) {
        self.position[j] = self.order.len();
        self.order.push(j);
    }

    fn remove_at(&mut self, p: usize) -> usize {
        let j = self.order.remove(p);
        self.position[j] = ABSENT;
        for (q, &k) in self.order.iter().enumerate().skip(p) {
            self.position[k] = q;
        }
        j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateKind {
    Add,
    Remove,
}

/// One factor update: `size` is `|J|` before the update and `trailing` the
/// number of indices after the removed one (zero for adds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateOp {
    pub kind: UpdateKind,
    pub size: usize,
    pub trailing: usize,
}

impl UpdateOp {
    /// Model cost of the append / trailing-refactor scheme.
    pub fn sorted_cost(&self) -> f64 {
        let g = self.size as f64;
        let k = self.trailing as f64;
        match self.kind {
            UpdateKind::Add => 0.5 * g * g,
            UpdateKind::Remove => 2.0 / 3.0 * k * k * k + (g - k) * k * k,
        }
    }

    pub fn qpoases_cost(&self) -> f64 {
        qpoases_cost_model(self.kind, self.size)
    }
}

/// Model cost of the qpOASES-style updates: `5Γ²` per add, `2.5Γ²` per remove.
pub fn qpoases_cost_model(kind: UpdateKind, size: usize) -> f64 {
    let g = size as f64;
    match kind {
        UpdateKind::Add => 5.0 * g * g,
        UpdateKind::Remove => 2.5 * g * g,
    }
}

/// Upper-triangular `R` with `RᵀR = H_JJ` in work-set order.
#[derive(Debug, Clone)]
pub struct CholFactor {
    workset: WorkSet,
    // cols[k] holds R[0..=k, k]
    cols: Vec<Vec<f64>>,
    pivot_floor: f64,
    flops: f64,
    ops: Vec<UpdateOp>,
}

impl CholFactor {
    pub fn empty(h: &DMatrix<f64>) -> Self {
        Self {
            workset: WorkSet::empty(h.nrows()),
            cols: Vec::new(),
            pivot_floor: pivot_floor(h),
            flops: 0.0,
            ops: Vec::new(),
        }
    }

    /// Factors `H_JJ` directly. The initial factorization is not charged to
    /// the update counters.
    pub fn factor_from_scratch(h: &DMatrix<f64>, workset: WorkSet) -> Result<Self> {
        assert_eq!(h.nrows(), workset.universe(), "work set universe vs H");
        let mut f = Self::empty(h);
        for &j in workset.order() {
            let col = f.append_column(h, j)?;
            f.cols.push(col);
            f.workset.push(j);
        }
        Ok(f)
    }

    pub fn workset(&self) -> &WorkSet {
        &self.workset
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Accumulated model flops of all updates so far.
    pub fn flops(&self) -> f64 {
        self.flops
    }

    pub fn ops(&self) -> &[UpdateOp] {
        &self.ops
    }

    /// Comparator model flops on the same update sequence.
    pub fn qpoases_flops(&self) -> f64 {
        self.ops.iter().map(UpdateOp::qpoases_cost).sum()
    }

    pub fn pivot_floor(&self) -> f64 {
        self.pivot_floor
    }

    /// `R[i, k]` for `i ≤ k`.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        if i <= k {
            self.cols[k][i]
        } else {
            0.0
        }
    }

    pub fn r_dense(&self) -> DMatrix<f64> {
        let g = self.len();
        DMatrix::from_fn(g, g, |i, k| self.entry(i, k))
    }

    /// `RᵀR`, for checking against `H_JJ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let r = self.r_dense();
        r.transpose() * r
    }

    /// Appends `j` at the end of the order: `Rᵀr̃ = H_{J,j}` and corner pivot
    /// `sqrt(H_jj − r̃ᵀr̃)`.
    pub fn add_index(&mut self, h: &DMatrix<f64>, j: usize) -> Result<()> {
        if self.workset.contains(j) {
            return Err(Error::InvalidArgument(format!("index {j} already in work set")));
        }
        let col = self.append_column(h, j)?;
        let op = UpdateOp {
            kind: UpdateKind::Add,
            size: self.len(),
            trailing: 0,
        };
        self.cols.push(col);
        self.workset.push(j);
        self.record(op);
        Ok(())
    }

    /// Removes `j`, keeping the leading block and refactoring the trailing
    /// block from `H_{J₂J₂} − R₁₂ᵀR₁₂`. The factor is unchanged on error.
    pub fn remove_index(&mut self, h: &DMatrix<f64>, j: usize) -> Result<()> {
        let p = self
            .workset
            .position(j)
            .ok_or_else(|| Error::InvalidArgument(format!("index {j} not in work set")))?;
        let size = self.len();
        let trailing_idx: Vec<usize> = self.workset.order()[p + 1..].to_vec();
        let k = trailing_idx.len();

        // Schur complement of the retained leading rows, packed by column.
        let mut schur: Vec<Vec<f64>> = Vec::with_capacity(k);
        for c in 0..k {
            let col_c = &self.cols[p + 1 + c];
            let hc = h.column(trailing_idx[c]);
            let mut s = Vec::with_capacity(c + 1);
            for a in 0..=c {
                let col_a = &self.cols[p + 1 + a];
                let lead: f64 = col_a[..p].iter().zip(&col_c[..p]).map(|(x, y)| x * y).sum();
                s.push(hc[trailing_idx[a]] - lead);
            }
            schur.push(s);
        }
        let trailing_factor = cholesky_packed(&schur, self.pivot_floor, &trailing_idx)?;

        self.cols.remove(p);
        for (c, rbar) in trailing_factor.into_iter().enumerate() {
            let col = &mut self.cols[p + c];
            col.truncate(p);
            col.extend(rbar);
        }
        self.workset.remove_at(p);
        self.record(UpdateOp {
            kind: UpdateKind::Remove,
            size,
            trailing: k,
        });
        Ok(())
    }

    /// `H_JJ⁻¹ rhs` by the two triangular solves `Rᵀy = rhs`, `Rx = y`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.len(), "rhs dimension");
        let mut x = self.solve_lower(rhs);
        for k in (0..self.len()).rev() {
            let col = &self.cols[k];
            x[k] /= col[k];
            let xk = x[k];
            for (xi, rik) in x[..k].iter_mut().zip(&col[..k]) {
                *xi -= rik * xk;
            }
        }
        x
    }

    /// Forward substitution with `Rᵀ`.
    fn solve_lower(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = rhs.to_vec();
        for k in 0..self.len() {
            let col = &self.cols[k];
            let s: f64 = col[..k].iter().zip(&y[..k]).map(|(r, v)| r * v).sum();
            y[k] = (y[k] - s) / col[k];
        }
        y
    }

    fn append_column(&self, h: &DMatrix<f64>, j: usize) -> Result<Vec<f64>> {
        let hj = h.column(j);
        let rhs: Vec<f64> = self.workset.order().iter().map(|&i| hj[i]).collect();
        let mut col = self.solve_lower(&rhs);
        let d = hj[j] - col.iter().map(|v| v * v).sum::<f64>();
        if !(d > self.pivot_floor) {
            return Err(Error::Degenerate {
                index: j,
                pivot: d,
                floor: self.pivot_floor,
            });
        }
        col.push(d.sqrt());
        Ok(col)
    }

    /// Takes over the update counters of `other`, typically an abandoned
    /// tentative copy of this factor.
    pub(crate) fn carry_counters_from(&mut self, other: &CholFactor) {
        self.flops = other.flops;
        self.ops = other.ops.clone();
    }

    fn record(&mut self, op: UpdateOp) {
        self.flops += op.sorted_cost();
        self.ops.push(op);
    }
}

fn pivot_floor(h: &DMatrix<f64>) -> f64 {
    let max_diag = (0..h.nrows()).fold(0.0f64, |acc, i| acc.max(h[(i, i)]));
    PIVOT_REL_FLOOR * max_diag
}

/// Cholesky of a symmetric matrix given as packed upper columns; returns the
/// factor in the same layout.
fn cholesky_packed(s: &[Vec<f64>], floor: f64, labels: &[usize]) -> Result<Vec<Vec<f64>>> {
    let k = s.len();
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in 0..k {
        let mut col = Vec::with_capacity(c + 1);
        for a in 0..c {
            let ra = &r[a];
            let acc: f64 = ra[..a].iter().zip(&col[..a]).map(|(x, y)| x * y).sum();
            col.push((s[c][a] - acc) / ra[a]);
        }
        let d = s[c][c] - col.iter().map(|v| v * v).sum::<f64>();
        if !(d > floor) {
            return Err(Error::Degenerate {
                index: labels[c],
                pivot: d,
                floor,
            });
        }
        col.push(d.sqrt());
        r.push(col);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0])
    }

    #[test]
    fn scratch_hand_cases() {
        let one = DMatrix::from_element(1, 1, 4.0);
        let f = CholFactor::factor_from_scratch(&one, WorkSet::full(1)).unwrap();
        assert_eq!(f.r_dense(), DMatrix::from_element(1, 1, 2.0));

        let f = CholFactor::factor_from_scratch(&h2(), WorkSet::full(2)).unwrap();
        assert_eq!(f.r_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]));
        assert_eq!(f.flops(), 0.0);
    }

    #[test]
    fn add_hand_cases() {
        let h = DMatrix::from_element(1, 1, 9.0);
        let mut f = CholFactor::empty(&h);
        f.add_index(&h, 0).unwrap();
        assert_eq!(f.r_dense(), DMatrix::from_element(1, 1, 3.0));

        let mut f = CholFactor::factor_from_scratch(&h2(), WorkSet::new(vec![0], 2).unwrap()).unwrap();
        f.add_index(&h2(), 1).unwrap();
        assert_eq!(f.r_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]));
        assert_eq!(f.flops(), 0.5);
        assert!(f.add_index(&h2(), 1).is_err());
    }

    #[test]
    fn remove_hand_cases() {
        let mut f = CholFactor::factor_from_scratch(&h2(), WorkSet::full(2)).unwrap();
        f.remove_index(&h2(), 0).unwrap();
        assert_abs_diff_eq!(f.entry(0, 0), 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(f.workset().order(), &[1]);
        // Γ = 2, |J₂| = 1 → ⅔ + 1
        assert_abs_diff_eq!(f.flops(), 2.0 / 3.0 + 1.0, epsilon = 1e-15);

        let mut f = CholFactor::factor_from_scratch(&h2(), WorkSet::full(2)).unwrap();
        f.remove_index(&h2(), 1).unwrap();
        assert_eq!(f.r_dense(), DMatrix::from_element(1, 1, 2.0));
        assert_eq!(f.flops(), 0.0);
        assert!(f.remove_index(&h2(), 1).is_err());
    }

    #[test]
    fn degenerate_add_reports_error_and_keeps_state() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let mut f = CholFactor::factor_from_scratch(&h, WorkSet::new(vec![0], 2).unwrap()).unwrap();
        assert!(matches!(f.add_index(&h, 1), Err(Error::Degenerate { index: 1, .. })));
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn solve_hand_cases() {
        let h = DMatrix::from_element(1, 1, 4.0);
        let f = CholFactor::factor_from_scratch(&h, WorkSet::full(1)).unwrap();
        assert_eq!(f.solve(&[8.0]), vec![2.0]);
        let id = DMatrix::<f64>::identity(3, 3);
        let f = CholFactor::factor_from_scratch(&id, WorkSet::full(3)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.0]), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn comparator_cost_model() {
        assert_eq!(qpoases_cost_model(UpdateKind::Add, 10), 500.0);
        assert_eq!(qpoases_cost_model(UpdateKind::Remove, 10), 250.0);
        assert_eq!(qpoases_cost_model(UpdateKind::Add, 0), 0.0);
        assert_eq!(qpoases_cost_model(UpdateKind::Remove, 0), 0.0);
    }

    #[test]
    fn workset_bookkeeping() {
        assert!(WorkSet::new(vec![0, 0], 2).is_err());
        assert!(WorkSet::new(vec![3], 2).is_err());
        let mut w = WorkSet::new(vec![2, 0, 3], 4).unwrap();
        assert_eq!(w.complement(), vec![1]);
        w.remove_at(0);
        assert_eq!(w.position(3), Some(1));
        assert!(!w.contains(2));
    }
}
