//! Reference solvers and instance generators for verification: brute-force
//! support enumeration for small box QPs, instances with a known optimum
//! built from complementary primal/dual pairs, and the random recipes used
//! by the benchmark suites.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_inf, norm_inf, sym_mul_vec};
use crate::problem::{BoxQP, LinearProgram, Problem, StronglyConvexQP};
use crate::sparse::{SparseMatrix, Triple};

/// Largest box QP accepted by [`enumerate_box_qp`].
pub const ENUMERATION_LIMIT: usize = 20;

/// Regularisation added to `BᵀB` by the random SCQP recipe.
pub const RECIPE_SHIFT: f64 = 1e-4;

const RESAMPLE_LIMIT: usize = 50;

/// Largest accepted condition number of the sampled basis block.
pub const BASIS_CONDITION_LIMIT: f64 = 1e2;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| normal(rng)).collect()
}

/// Sparse standard-normal matrix: each entry is present independently with
/// probability `density`. Entries are drawn row by row.
pub fn sprandn(rows: usize, cols: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<Triple> {
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random::<f64>() < density {
                out.push(Triple(i, j, normal(rng)));
            }
        }
    }
    out
}

/// Solves `min ½zᵀHz + fᵀz, z ≥ 0` by trying every support set `S`: the
/// candidate `H_SS z_S = −f_S` is accepted when `z_S > 0` and the gradient
/// on the complement is nonnegative.
pub fn enumerate_box_qp(p: &BoxQP) -> Result<Vec<f64>> {
    let n = p.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to n ≤ {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    let h = p.h();
    let f = p.f();
    let scale = 1.0 + norm_inf(f) + h.amax();
    let tol = 1e-12 * scale;
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let k = support.len();
        let mut z = vec![0.0; n];
        if k > 0 {
            let sub = DMatrix::from_fn(k, k, |a, b| h[(support[a], support[b])]);
            let Some(chol) = sub.cholesky() else {
                continue;
            };
            let rhs = DVector::from_iterator(k, support.iter().map(|&j| -f[j]));
            let zs = chol.solve(&rhs);
            if zs.iter().any(|&v| v <= 0.0) {
                continue;
            }
            for (a, &j) in support.iter().enumerate() {
                z[j] = zs[a];
            }
        }
        let g = p.gradient(&z);
        let dual_ok = (0..n)
            .filter(|&j| mask & (1 << j) == 0)
            .all(|j| g[j] >= -tol);
        if dual_ok {
            accepted.push(z);
        }
    }
    let Some(first) = accepted.first() else {
        return Err(Error::Oracle("no support set satisfies the optimality conditions".into()));
    };
    if let Some(other) = accepted.iter().find(|z| dist_inf(z, first) > 1e-8) {
        return Err(Error::Oracle(format!(
            "two distinct candidates accepted (distance {:e})",
            dist_inf(other, first)
        )));
    }
    Ok(first.clone())
}

/// Plain projected gradient with step `1/λ_max(H)` run until successive
/// iterates differ by at most `tol` in the max norm.
pub fn projected_gradient_reference(p: &BoxQP, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let lmax = p.h().clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / lmax;
    let mut z = vec![0.0; p.n()];
    for _ in 0..max_iters {
        let g = p.gradient(&z);
        let next: Vec<f64> = z
            .iter()
            .zip(&g)
            .map(|(zj, gj)| (zj - step * gj).max(0.0))
            .collect();
        let moved = dist_inf(&z, &next);
        z = next;
        if moved <= tol {
            return Ok(z);
        }
    }
    Err(Error::NotConverged {
        stage: "reference projected gradient",
        iterations: max_iters,
    })
}

/// Random box QP with `H = MᵀM/n + ridge·I` (`M` standard normal) and
/// standard normal `f`.
pub fn random_box_qp(n: usize, ridge: f64, seed: u64) -> Result<BoxQP> {
    let mut rng = seeded_rng(seed);
    let m = DMatrix::from_fn(n, n, |_, _| normal(&mut rng));
    let mut h = m.transpose() * &m / n.max(1) as f64;
    for i in 0..n {
        h[(i, i)] += ridge;
    }
    let h = (&h + h.transpose()) * 0.5;
    let f = normal_vec(&mut rng, n);
    BoxQP::new(h, f)
}

/// Instance whose optimum is known by construction.
#[derive(Debug, Clone)]
pub struct KnownSolutionInstance {
    pub problem: Problem,
    pub x_star: Vec<f64>,
    /// Equality multiplier `y*`.
    pub lambda_star: Vec<f64>,
    /// Bound multiplier `s*`, complementary to `x*`.
    pub s_star: Vec<f64>,
}

fn check_pair(x: &[f64], s: &[f64]) -> Result<()> {
    for (j, (&xj, &sj)) in x.iter().zip(s).enumerate() {
        if !(xj >= 0.0 && sj >= 0.0) {
            return Err(Error::InvalidArgument(format!("x*[{j}] and s*[{j}] must be nonnegative")));
        }
        if xj * sj != 0.0 {
            return Err(Error::InvalidArgument(format!("x*[{j}]·s*[{j}] is not zero")));
        }
    }
    Ok(())
}

impl KnownSolutionInstance {
    /// `b = Ax*`, `c = Aᵀy* + s*`.
    pub fn lp_from_parts(
        a: SparseMatrix,
        x_star: Vec<f64>,
        y_star: Vec<f64>,
        s_star: Vec<f64>,
    ) -> Result<Self> {
        check_dim("x*", a.ncols(), x_star.len())?;
        check_dim("s*", a.ncols(), s_star.len())?;
        check_dim("y*", a.nrows(), y_star.len())?;
        check_pair(&x_star, &s_star)?;
        let b = a.mul_vec(&x_star);
        let c: Vec<f64> = a
            .tr_mul_vec(&y_star)
            .iter()
            .zip(&s_star)
            .map(|(v, s)| v + s)
            .collect();
        Ok(Self {
            problem: Problem::Lp(LinearProgram::new(a, b, c)?),
            x_star,
            lambda_star: y_star,
            s_star,
        })
    }

    /// `b = Ax*`, `r = −Qx* + Aᵀy* + s*`.
    pub fn scqp_from_parts(
        q: DMatrix<f64>,
        a: SparseMatrix,
        x_star: Vec<f64>,
        y_star: Vec<f64>,
        s_star: Vec<f64>,
    ) -> Result<Self> {
        check_dim("x*", a.ncols(), x_star.len())?;
        check_dim("s*", a.ncols(), s_star.len())?;
        check_dim("y*", a.nrows(), y_star.len())?;
        check_dim("Q", a.ncols(), q.nrows())?;
        check_pair(&x_star, &s_star)?;
        let b = a.mul_vec(&x_star);
        let qx = sym_mul_vec(&q, &x_star);
        let aty = a.tr_mul_vec(&y_star);
        let r: Vec<f64> = (0..x_star.len())
            .map(|j| -qx[j] + aty[j] + s_star[j])
            .collect();
        Ok(Self {
            problem: Problem::Scqp(StronglyConvexQP::new(q, a, r, b)?),
            x_star,
            lambda_star: y_star,
            s_star,
        })
    }

    /// Objective value at `x*`.
    pub fn optimum(&self) -> f64 {
        self.problem.objective(&self.x_star)
    }

    pub fn as_lp(&self) -> Option<&LinearProgram> {
        match &self.problem {
            Problem::Lp(p) => Some(p),
            Problem::Scqp(_) => None,
        }
    }

    pub fn as_scqp(&self) -> Option<&StronglyConvexQP> {
        match &self.problem {
            Problem::Scqp(p) => Some(p),
            Problem::Lp(_) => None,
        }
    }
}

fn check_known_args(m: usize, n: usize, density: f64) -> Result<()> {
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!("need 1 ≤ m < n, got m={m}, n={n}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
    }
    Ok(())
}

/// Sparse `A` with guaranteed entries `±(2 + |N(0,1)|)` at `(i, B[i])` on a
/// random basis `B`, resampled until the square block `A_B` has condition
/// number at most [`BASIS_CONDITION_LIMIT`].
fn sample_constraints(
    m: usize,
    n: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(SparseMatrix, Vec<usize>)> {
    for _ in 0..RESAMPLE_LIMIT {
        let mut triples = sprandn(m, n, density, rng);
        let basis: Vec<usize> = sample(rng, n, m).into_vec();
        for (i, &j) in basis.iter().enumerate() {
            let v = normal(rng);
            triples.push(Triple(i, j, v.signum() * (2.0 + v.abs())));
        }
        let a = SparseMatrix::from_triples(m, n, &triples)?;
        let dense = a.to_dense();
        let block = DMatrix::from_fn(m, m, |i, k| dense[(i, basis[k])]);
        let sv = block.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if lo > 0.0 && hi / lo <= BASIS_CONDITION_LIMIT {
            return Ok((a, basis));
        }
    }
    Err(Error::Oracle(format!(
        "could not sample a well-conditioned basis block after {RESAMPLE_LIMIT} attempts"
    )))
}

/// LP with optimum `x*` supported on a nonsingular basis and strictly
/// complementary `s*`.
pub fn make_known_lp(m: usize, n: usize, seed: u64, density: f64) -> Result<KnownSolutionInstance> {
    check_known_args(m, n, density)?;
    let mut rng = seeded_rng(seed);
    let (a, basis) = sample_constraints(m, n, density, &mut rng)?;
    let mut x_star = vec![0.0; n];
    for &j in &basis {
        x_star[j] = rng.random_range(0.5..2.0);
    }
    let y_star = normal_vec(&mut rng, m);
    let s_star: Vec<f64> = (0..n)
        .map(|j| if x_star[j] > 0.0 { 0.0 } else { rng.random_range(0.5..2.0) })
        .collect();
    KnownSolutionInstance::lp_from_parts(a, x_star, y_star, s_star)
}

/// Strongly convex QP with `Q = BᵀB + 10⁻⁴I` (`B` square sparse normal)
/// and an optimum whose support contains a nonsingular basis plus about
/// half of the remaining columns.
pub fn make_known_scqp(m: usize, n: usize, seed: u64, density: f64) -> Result<KnownSolutionInstance> {
    check_known_args(m, n, density)?;
    let mut rng = seeded_rng(seed);
    let (a, basis) = sample_constraints(m, n, density, &mut rng)?;
    let q = recipe_hessian(n, n, density, &mut rng)?;
    let mut x_star = vec![0.0; n];
    for &j in &basis {
        x_star[j] = rng.random_range(0.5..2.0);
    }
    for xj in x_star.iter_mut() {
        if *xj == 0.0 && rng.random::<f64>() < 0.5 {
            *xj = rng.random_range(0.5..2.0);
        }
    }
    let y_star = normal_vec(&mut rng, m);
    let s_star: Vec<f64> = (0..n)
        .map(|j| if x_star[j] > 0.0 { 0.0 } else { rng.random_range(0.5..2.0) })
        .collect();
    KnownSolutionInstance::scqp_from_parts(q, a, x_star, y_star, s_star)
}

fn recipe_hessian(q: usize, n: usize, density: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let b = SparseMatrix::from_triples(q, n, &sprandn(q, n, density, rng))?;
    let mut h = DMatrix::zeros(n, n);
    b.add_scaled_gram(1.0, &mut h);
    for i in 0..n {
        h[(i, i)] += RECIPE_SHIFT;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomKind {
    Lp,
    Scqp,
}

/// Sizes and densities of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub kind: RandomKind,
    pub m: usize,
    pub n: usize,
    /// Rows of the factor `B`; ignored for LPs.
    pub q: usize,
    pub density_a: f64,
    pub density_b: f64,
    pub seed: u64,
}

/// Random instance following the benchmark recipe.
///
/// LP: `A` sparse normal with density `d_A`, `b = 10·N(0,1)ᵐ`,
/// `c ~ U(0,1)ⁿ`. SCQP: the same `A`, `Q = BᵀB + 10⁻⁴I` with `B` sparse
/// normal `q × n` of density `d_B`, `r = −Bᵀg` with `g ~ N(0,1)^q`, and
/// `b = 10·N(0,1)ᵐ`. Draw order: `A`, then `B`, `g`, `b`, `c`.
pub fn gen_random(spec: &RandomSpec) -> Result<Problem> {
    Ok(gen_random_instance(spec)?.problem)
}

/// Output of [`gen_random_instance`].
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub problem: Problem,
    /// `B` with `Q = BᵀB + 10⁻⁴I`, SCQPs only.
    pub factor: Option<SparseMatrix>,
}

/// [`gen_random`] that also returns the factor of `Q`.
pub fn gen_random_instance(spec: &RandomSpec) -> Result<RandomInstance> {
    let RandomSpec {
        kind,
        m,
        n,
        q,
        density_a,
        density_b,
        seed,
    } = *spec;
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("need m ≥ 1 and n ≥ 1".into()));
    }
    for d in [density_a, density_b] {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {d}")));
        }
    }
    let mut rng = seeded_rng(seed);
    let a = SparseMatrix::from_triples(m, n, &sprandn(m, n, density_a, &mut rng))?;
    match kind {
        RandomKind::Lp => {
            let b: Vec<f64> = normal_vec(&mut rng, m).iter().map(|v| 10.0 * v).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            Ok(RandomInstance {
                problem: Problem::Lp(LinearProgram::new(a, b, c)?),
                factor: None,
            })
        }
        RandomKind::Scqp => {
            if q == 0 {
                return Err(Error::InvalidArgument("need q ≥ 1 for an SCQP".into()));
            }
            let bm = SparseMatrix::from_triples(q, n, &sprandn(q, n, density_b, &mut rng))?;
            let mut h = DMatrix::zeros(n, n);
            bm.add_scaled_gram(1.0, &mut h);
            for i in 0..n {
                h[(i, i)] += RECIPE_SHIFT;
            }
            let g = normal_vec(&mut rng, q);
            let r: Vec<f64> = bm.tr_mul_vec(&g).iter().map(|v| -v).collect();
            let b: Vec<f64> = normal_vec(&mut rng, m).iter().map(|v| 10.0 * v).collect();
            Ok(RandomInstance {
                problem: Problem::Scqp(StronglyConvexQP::new(h, a, r, b)?),
                factor: Some(bm),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{check_lp_kkt, check_scqp_kkt};

    #[test]
    fn enumeration_hand_cases() {
        let p = BoxQP::new(DMatrix::identity(2, 2), vec![-1.0, 1.0]).unwrap();
        assert_eq!(enumerate_box_qp(&p).unwrap(), vec![1.0, 0.0]);
        let p = BoxQP::new(DMatrix::identity(3, 3), vec![0.5, 0.0, 2.0]).unwrap();
        assert_eq!(enumerate_box_qp(&p).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn enumeration_size_limit() {
        let p = BoxQP::new(DMatrix::identity(21, 21), vec![1.0; 21]).unwrap();
        assert!(enumerate_box_qp(&p).is_err());
    }

    #[test]
    fn forced_lp_construction() {
        let a = SparseMatrix::from_triples(1, 2, &[Triple(0, 0, 1.0), Triple(0, 1, 1.0)]).unwrap();
        let inst =
            KnownSolutionInstance::lp_from_parts(a, vec![1.0, 0.0], vec![1.0], vec![0.0, 0.25])
                .unwrap();
        let lp = inst.as_lp().unwrap();
        assert_eq!(lp.c(), &[1.0, 1.25]);
        assert_eq!(lp.b(), &[1.0]);
    }

    #[test]
    fn forced_scqp_construction() {
        let a = SparseMatrix::from_triples(1, 2, &[Triple(0, 0, 1.0), Triple(0, 1, 1.0)]).unwrap();
        let inst = KnownSolutionInstance::scqp_from_parts(
            DMatrix::identity(2, 2),
            a,
            vec![0.5, 0.5],
            vec![0.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let qp = inst.as_scqp().unwrap();
        assert_eq!(qp.r(), &[-0.5, -0.5]);
        assert_eq!(qp.b(), &[1.0]);
    }

    #[test]
    fn non_complementary_parts_rejected() {
        let a = SparseMatrix::from_triples(1, 2, &[Triple(0, 0, 1.0)]).unwrap();
        assert!(
            KnownSolutionInstance::lp_from_parts(a, vec![1.0, 0.0], vec![0.0], vec![1.0, 0.0])
                .is_err()
        );
    }

    #[test]
    fn known_instances_certify_themselves() {
        let lp = make_known_lp(5, 12, 3, 0.4).unwrap();
        let cert = check_lp_kkt(lp.as_lp().unwrap(), &lp.x_star, &lp.lambda_star, 0.0);
        assert!(cert.kkt.eq_violation <= 1e-14);
        assert!(cert.kkt.stationarity_residual <= 1e-14);
        assert!(cert.duality_gap <= 1e-12);

        let qp = make_known_scqp(5, 12, 3, 0.4).unwrap();
        let kkt = check_scqp_kkt(qp.as_scqp().unwrap(), &qp.x_star, &qp.lambda_star, 0.0);
        assert!(kkt.passes(1e-12));
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = RandomSpec {
            kind: RandomKind::Scqp,
            m: 4,
            n: 10,
            q: 6,
            density_a: 0.3,
            density_b: 0.3,
            seed: 11,
        };
        let (p1, p2) = (gen_random(&spec).unwrap(), gen_random(&spec).unwrap());
        assert_eq!(p1.a().triples(), p2.a().triples());
        let a1 = make_known_lp(3, 7, 5, 0.5).unwrap();
        let a2 = make_known_lp(3, 7, 5, 0.5).unwrap();
        assert_eq!(a1.x_star, a2.x_star);
        assert_eq!(a1.problem.a().triples(), a2.problem.a().triples());
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(make_known_lp(5, 5, 0, 0.5).is_err());
        assert!(make_known_lp(2, 5, 0, 0.0).is_err());
    }
}
