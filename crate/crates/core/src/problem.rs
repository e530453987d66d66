//! Problem instances (standard-form LP, strongly convex QP, nonnegative box
//! QP) and first-order optimality checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chol::{CholFactor, WorkSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2, sym_mul_vec};
use crate::sparse::SparseMatrix;

/// `min cᵀx  s.t.  Ax = b, x ≥ 0`
#[derive(Debug, Clone)]
pub struct LinearProgram {
    a: SparseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl LinearProgram {
    pub fn new(a: SparseMatrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidArgument("LP needs m ≥ 1 and n ≥ 1".into()));
        }
        check_dim("b", a.nrows(), b.len())?;
        check_dim("c", a.ncols(), c.len())?;
        check_finite("b", &b)?;
        check_finite("c", &c)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    pub fn eq_violation(&self, x: &[f64]) -> f64 {
        residual_norm(&self.a, x, &self.b)
    }
}

/// Either kind of constrained instance.
#[derive(Debug, Clone)]
pub enum Problem {
    Lp(LinearProgram),
    Scqp(StronglyConvexQP),
}

impl Problem {
    pub fn m(&self) -> usize {
        match self {
            Problem::Lp(p) => p.m(),
            Problem::Scqp(p) => p.m(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Problem::Lp(p) => p.n(),
            Problem::Scqp(p) => p.n(),
        }
    }

    pub fn a(&self) -> &SparseMatrix {
        match self {
            Problem::Lp(p) => p.a(),
            Problem::Scqp(p) => p.a(),
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Lp(p) => p.objective(x),
            Problem::Scqp(p) => p.objective(x),
        }
    }

    pub fn eq_violation(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Lp(p) => p.eq_violation(x),
            Problem::Scqp(p) => p.eq_violation(x),
        }
    }
}

/// `min ½xᵀQx + rᵀx  s.t.  Ax = b, x ≥ 0` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct StronglyConvexQP {
    q: Arc<DMatrix<f64>>,
    a: SparseMatrix,
    r: Vec<f64>,
    b: Vec<f64>,
}

impl StronglyConvexQP {
    pub fn new(q: DMatrix<f64>, a: SparseMatrix, r: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::from_shared(Arc::new(q), a, r, b)
    }

    /// Same as [`StronglyConvexQP::new`] but shares an already allocated `Q`.
    pub fn from_shared(
        q: Arc<DMatrix<f64>>,
        a: SparseMatrix,
        r: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() == 0 || n == 0 {
            return Err(Error::InvalidArgument("QP needs m ≥ 1 and n ≥ 1".into()));
        }
        check_dim("Q rows", n, q.nrows())?;
        check_dim("Q cols", n, q.ncols())?;
        check_dim("r", n, r.len())?;
        check_dim("b", a.nrows(), b.len())?;
        check_finite("r", &r)?;
        check_finite("b", &b)?;
        check_spd(&q)?;
        Ok(Self { q, a, r, b })
    }

    /// Rebuilds the instance with a different linear term, skipping the
    /// positive-definiteness check on the unchanged `Q`.
    pub fn with_linear_term(&self, r: Vec<f64>) -> Result<Self> {
        check_dim("r", self.n(), r.len())?;
        check_finite("r", &r)?;
        Ok(Self {
            q: Arc::clone(&self.q),
            a: self.a.clone(),
            r,
            b: self.b.clone(),
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn q_shared(&self) -> &Arc<DMatrix<f64>> {
        &self.q
    }
    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &sym_mul_vec(&self.q, x)) + dot(&self.r, x)
    }

    pub fn eq_violation(&self, x: &[f64]) -> f64 {
        residual_norm(&self.a, x, &self.b)
    }
}

/// `min ½zᵀHz + fᵀz  s.t.  z ≥ 0`, the uniform augmented Lagrangian
/// subproblem.
#[derive(Debug, Clone)]
pub struct BoxQP {
    h: Arc<DMatrix<f64>>,
    f: Vec<f64>,
}

impl BoxQP {
    pub fn new(h: DMatrix<f64>, f: Vec<f64>) -> Result<Self> {
        check_dim("H cols", h.nrows(), h.ncols())?;
        check_dim("f", h.nrows(), f.len())?;
        check_finite("f", &f)?;
        check_spd(&h)?;
        Ok(Self {
            h: Arc::new(h),
            f,
        })
    }

    /// Pairs an already validated Hessian with a new linear term.
    pub fn with_linear_term(&self, f: Vec<f64>) -> Result<Self> {
        check_dim("f", self.n(), f.len())?;
        check_finite("f", &f)?;
        Ok(Self {
            h: Arc::clone(&self.h),
            f,
        })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = sym_mul_vec(&self.h, z);
        for (gj, fj) in g.iter_mut().zip(&self.f) {
            *gj += fj;
        }
        g
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        0.5 * dot(z, &sym_mul_vec(&self.h, z)) + dot(&self.f, z)
    }
}

/// Residuals of the first-order optimality conditions at a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Worst violation of stationarity on the support, dual feasibility on
    /// the zero set, and primal nonnegativity.
    pub stationarity_residual: f64,
    /// `‖Ax − b‖₂`, zero for box problems.
    pub eq_violation: f64,
    pub min_x: f64,
    /// `max_j |x_j · s_j|` with `s` the (reduced) gradient.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.eq_violation)
            .max(self.complementarity)
            .max((-self.min_x).max(0.0))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Builds the box QP with `H = Q + βAᵀA` and `f = r − Aᵀλ − βAᵀb`.
pub fn build_box_qp(qp: &StronglyConvexQP, beta: f64, lambda: &[f64]) -> Result<BoxQP> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("β must be positive, got {beta}")));
    }
    check_dim("λ", qp.m(), lambda.len())?;
    let mut h = (*qp.q).clone();
    qp.a.add_scaled_gram(beta, &mut h);
    let f = box_linear_term(qp, beta, lambda);
    BoxQP::new(h, f)
}

/// `f = r − Aᵀλ − βAᵀb`
pub fn box_linear_term(qp: &StronglyConvexQP, beta: f64, lambda: &[f64]) -> Vec<f64> {
    let shifted: Vec<f64> = lambda
        .iter()
        .zip(&qp.b)
        .map(|(l, b)| l + beta * b)
        .collect();
    let at = qp.a.tr_mul_vec(&shifted);
    qp.r.iter().zip(at).map(|(r, a)| r - a).collect()
}

/// Evaluates the nonnegative box QP optimality conditions at `z`.
///
/// With `g = Hz + f`, entries with `z_j > tol` must have `g_j = 0`; every
/// entry must have `g_j ≥ 0` and `z_j ≥ 0`.
pub fn check_box_kkt(p: &BoxQP, z: &[f64], tol: f64) -> KktReport {
    assert_eq!(z.len(), p.n(), "dimension of z");
    let g = p.gradient(z);
    let (stationarity_residual, min_x, complementarity) = sign_conditions(z, &g, tol);
    KktReport {
        stationarity_residual,
        eq_violation: 0.0,
        min_x,
        complementarity,
    }
}

/// Optimality check for the strongly convex QP with multiplier `λ`; the
/// bound multiplier is taken as `s = Qx + r − Aᵀλ`.
pub fn check_scqp_kkt(qp: &StronglyConvexQP, x: &[f64], lambda: &[f64], tol: f64) -> KktReport {
    assert_eq!(x.len(), qp.n(), "dimension of x");
    assert_eq!(lambda.len(), qp.m(), "dimension of λ");
    let qx = sym_mul_vec(&qp.q, x);
    let at = qp.a.tr_mul_vec(lambda);
    let s: Vec<f64> = (0..qp.n()).map(|j| qx[j] + qp.r[j] - at[j]).collect();
    let (stationarity_residual, min_x, complementarity) = sign_conditions(x, &s, tol);
    KktReport {
        stationarity_residual,
        eq_violation: qp.eq_violation(x),
        min_x,
        complementarity,
    }
}

/// Optimality certificate for a standard-form LP given a dual estimate `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    pub kkt: KktReport,
    /// `|cᵀx − bᵀy|`
    pub duality_gap: f64,
}

impl LpCertificate {
    /// Passes when every residual is below `tol` and the duality gap is below
    /// `tol · (1 + |cᵀx|)`.
    pub fn passes(&self, tol: f64, objective: f64) -> bool {
        self.kkt.passes(tol) && self.duality_gap <= tol * (1.0 + objective.abs())
    }
}

pub fn check_lp_kkt(lp: &LinearProgram, x: &[f64], y: &[f64], tol: f64) -> LpCertificate {
    assert_eq!(x.len(), lp.n(), "dimension of x");
    assert_eq!(y.len(), lp.m(), "dimension of y");
    let aty = lp.a.tr_mul_vec(y);
    let s: Vec<f64> = lp.c.iter().zip(&aty).map(|(c, a)| c - a).collect();
    let (stationarity_residual, min_x, complementarity) = sign_conditions(x, &s, tol);
    LpCertificate {
        kkt: KktReport {
            stationarity_residual,
            eq_violation: lp.eq_violation(x),
            min_x,
            complementarity,
        },
        duality_gap: (lp.objective(x) - dot(&lp.b, y)).abs(),
    }
}

fn sign_conditions(x: &[f64], s: &[f64], tol: f64) -> (f64, f64, f64) {
    let mut stationarity: f64 = 0.0;
    let mut min_x = f64::INFINITY;
    let mut comp: f64 = 0.0;
    for (&xj, &sj) in x.iter().zip(s) {
        if xj > tol {
            stationarity = stationarity.max(sj.abs());
        }
        stationarity = stationarity.max((-sj).max(0.0)).max((-xj).max(0.0));
        min_x = min_x.min(xj);
        comp = comp.max((xj * sj).abs());
    }
    if x.is_empty() {
        min_x = 0.0;
    }
    (stationarity, min_x, comp)
}

fn residual_norm(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    norm2(&r)
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} contains non-finite entries")))
    }
}

/// Symmetry to `1e−12 · max|M|` followed by a full Cholesky attempt.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let n = m.nrows();
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    match CholFactor::factor_from_scratch(m, WorkSet::full(n)) {
        Ok(_) => Ok(()),
        Err(Error::Degenerate { index, pivot, .. }) => Err(Error::NotPositiveDefinite {
            position: index,
            pivot,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triple;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row_ones() -> SparseMatrix {
        SparseMatrix::from_triples(1, 2, &[Triple(0, 0, 1.0), Triple(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn box_qp_from_small_scqp() {
        let qp = StronglyConvexQP::new(DMatrix::identity(2, 2), row_ones(), vec![0.0; 2], vec![1.0])
            .unwrap();
        let p = build_box_qp(&qp, 1.0, &[0.0]).unwrap();
        assert_eq!(*p.h(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        assert_eq!(p.f(), &[-1.0, -1.0]);
        assert!(build_box_qp(&qp, 0.0, &[0.0]).is_err());
        assert!(build_box_qp(&qp, 1.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn box_qp_hessian_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, n) = (5, 3);
        let mut triples = Vec::new();
        let mut dense_a = vec![vec![0.0; n]; m];
        for (i, row) in dense_a.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if rng.random::<f64>() < 0.7 {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    *cell = v;
                    triples.push(Triple(i, j, v));
                }
            }
        }
        let a = SparseMatrix::from_triples(m, n, &triples).unwrap();
        let q = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 2.0, 0.1, 0.0, 0.1, 1.0]);
        let beta = 2.5;
        let qp = StronglyConvexQP::new(q.clone(), a, vec![0.3, -0.2, 0.1], vec![1.0; m]).unwrap();
        let p = build_box_qp(&qp, beta, &[0.0; 5]).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut acc = q[(i, j)];
                for row in &dense_a {
                    acc += beta * row[i] * row[j];
                }
                assert_abs_diff_eq!(p.h()[(i, j)], acc, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_and_asymmetric_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            BoxQP::new(bad, vec![0.0; 2]),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            BoxQP::new(asym, vec![0.0; 2]),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn box_kkt_hand_cases() {
        let p = BoxQP::new(DMatrix::identity(2, 2), vec![-1.0, 1.0]).unwrap();
        let ok = check_box_kkt(&p, &[1.0, 0.0], 0.0);
        assert_eq!(ok.stationarity_residual, 0.0);
        assert_eq!(ok.complementarity, 0.0);
        let zero = check_box_kkt(&p, &[0.0, 0.0], 0.0);
        assert_eq!(zero.stationarity_residual, 1.0);
    }

    #[test]
    fn scqp_kkt_residuals() {
        // min ½‖x‖² − (1,1)ᵀx  s.t. x₁ + x₂ = 2  → x = (1,1), λ = 0
        let qp = StronglyConvexQP::new(
            DMatrix::identity(2, 2),
            row_ones(),
            vec![-1.0, -1.0],
            vec![2.0],
        )
        .unwrap();
        let rep = check_scqp_kkt(&qp, &[1.0, 1.0], &[0.0], 0.0);
        assert!(rep.max_residual() <= 1e-12);
        let off = check_scqp_kkt(&qp, &[1.0, 1.5], &[0.0], 0.0);
        assert_abs_diff_eq!(off.eq_violation, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn lp_certificate() {
        let lp = LinearProgram::new(row_ones(), vec![1.0], vec![1.0, 0.0]).unwrap();
        let cert = check_lp_kkt(&lp, &[0.0, 1.0], &[0.0], 1e-12);
        assert!(cert.passes(1e-12, 0.0));
        let wrong = check_lp_kkt(&lp, &[1.0, 0.0], &[1.0], 1e-12);
        assert!(!wrong.passes(1e-12, 1.0));
    }
}
