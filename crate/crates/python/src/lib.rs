//! Python bindings: problem types, the LP and SCQP solvers, the box QP
//! solver, file formats, generators and optimality checks.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qpas_core::alm::solve_box_qp as solve_box;
use qpas_core::apg::estimate_lipschitz;
use qpas_core::io::{self, ResultStatus};
use qpas_core::oracle::{self, RandomKind, RandomSpec};
use qpas_core::{
    alm_solve, check_lp_kkt as lp_kkt, check_scqp_kkt as scqp_kkt, pg_solve, AlmConfig, ApgConfig,
    BoxQP, Error, KktReport, LinearProgram, PasOptions, PgConfig, Problem, SparseMatrix,
    StronglyConvexQP, Triple,
};

create_exception!(qpas, QpasError, PyException);

fn err(e: Error) -> PyErr {
    QpasError::new_err(e.to_string())
}

/// Row-major nested lists to a matrix.
fn dense_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn dense_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn sparse_from_rows(rows: Vec<Vec<f64>>) -> PyResult<SparseMatrix> {
    Ok(SparseMatrix::from_dense(&dense_from_rows(rows)?))
}

fn sparse_from_triples(m: usize, n: usize, triples: Vec<(usize, usize, f64)>) -> PyResult<SparseMatrix> {
    let t: Vec<Triple> = triples.into_iter().map(|(i, j, v)| Triple(i, j, v)).collect();
    SparseMatrix::from_triples(m, n, &t).map_err(err)
}

/// `min cᵀx` subject to `Ax = b`, `x ≥ 0`.
#[pyclass(name = "LinearProgram", module = "qpas", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyLinearProgram {
    inner: LinearProgram,
}

#[pymethods]
impl PyLinearProgram {
    /// `a` is a dense row-major matrix.
    #[new]
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> PyResult<Self> {
        let inner = LinearProgram::new(sparse_from_rows(a)?, b, c).map_err(err)?;
        Ok(Self { inner })
    }

    /// `triples` holds 0-based `(row, column, value)` entries of `A`.
    #[staticmethod]
    fn from_triples(m: usize, n: usize, triples: Vec<(usize, usize, f64)>, b: Vec<f64>, c: Vec<f64>) -> PyResult<Self> {
        let inner = LinearProgram::new(sparse_from_triples(m, n, triples)?, b, c).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().to_vec()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c().to_vec()
    }

    fn a_triples(&self) -> Vec<(usize, usize, f64)> {
        self.inner.a().triples().into_iter().map(|Triple(i, j, v)| (i, j, v)).collect()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len("x", self.inner.n(), x.len())?;
        Ok(self.inner.objective(&x))
    }

    fn eq_violation(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len("x", self.inner.n(), x.len())?;
        Ok(self.inner.eq_violation(&x))
    }

    fn __repr__(&self) -> String {
        format!("LinearProgram(m={}, n={}, nnz={})", self.inner.m(), self.inner.n(), self.inner.a().nnz())
    }
}

/// `min ½xᵀQx + rᵀx` subject to `Ax = b`, `x ≥ 0`, with `Q` positive definite.
#[pyclass(name = "StronglyConvexQP", module = "qpas", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyScqp {
    inner: StronglyConvexQP,
}

#[pymethods]
impl PyScqp {
    #[new]
    fn new(q: Vec<Vec<f64>>, a: Vec<Vec<f64>>, r: Vec<f64>, b: Vec<f64>) -> PyResult<Self> {
        let inner = StronglyConvexQP::new(dense_from_rows(q)?, sparse_from_rows(a)?, r, b).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_triples(
        m: usize,
        n: usize,
        triples: Vec<(usize, usize, f64)>,
        q: Vec<Vec<f64>>,
        r: Vec<f64>,
        b: Vec<f64>,
    ) -> PyResult<Self> {
        let a = sparse_from_triples(m, n, triples)?;
        let inner = StronglyConvexQP::new(dense_from_rows(q)?, a, r, b).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        dense_to_rows(self.inner.q())
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.r().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().to_vec()
    }

    fn a_triples(&self) -> Vec<(usize, usize, f64)> {
        self.inner.a().triples().into_iter().map(|Triple(i, j, v)| (i, j, v)).collect()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len("x", self.inner.n(), x.len())?;
        Ok(self.inner.objective(&x))
    }

    fn eq_violation(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len("x", self.inner.n(), x.len())?;
        Ok(self.inner.eq_violation(&x))
    }

    fn __repr__(&self) -> String {
        format!("StronglyConvexQP(m={}, n={})", self.inner.m(), self.inner.n())
    }
}

/// `min ½zᵀHz + fᵀz` subject to `z ≥ 0`.
#[pyclass(name = "BoxQP", module = "qpas", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyBoxQp {
    inner: BoxQP,
}

#[pymethods]
impl PyBoxQp {
    #[new]
    fn new(h: Vec<Vec<f64>>, f: Vec<f64>) -> PyResult<Self> {
        let inner = BoxQP::new(dense_from_rows(h)?, f).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn objective(&self, z: Vec<f64>) -> PyResult<f64> {
        check_len("z", self.inner.n(), z.len())?;
        Ok(self.inner.objective(&z))
    }

    fn gradient(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len("z", self.inner.n(), z.len())?;
        Ok(self.inner.gradient(&z))
    }

    fn __repr__(&self) -> String {
        format!("BoxQP(n={})", self.inner.n())
    }
}

/// Solver output with the same fields as the JSON result files.
#[pyclass(name = "SolveResult", module = "qpas", frozen)]
pub struct PySolveResult {
    inner: io::SolveResult,
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            io::ProblemKind::Lp => "lp",
            io::ProblemKind::Scqp => "scqp",
        }
    }

    /// `optimal`, `max_iter` or `error`.
    #[getter]
    fn status(&self) -> &'static str {
        match self.inner.status {
            ResultStatus::Optimal => "optimal",
            ResultStatus::MaxIter => "max_iter",
            ResultStatus::Error => "error",
        }
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn eq_violation(&self) -> f64 {
        self.inner.eq_violation
    }

    #[getter]
    fn kkt_stationarity(&self) -> f64 {
        self.inner.kkt_stationarity
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    /// `y` for an LP, `λ` for an SCQP.
    #[getter]
    fn dual(&self) -> Vec<f64> {
        self.inner.dual.clone()
    }

    #[getter]
    fn wall_ms(&self) -> f64 {
        self.inner.wall_ms
    }

    #[getter]
    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = &self.inner.counters;
        let d = PyDict::new(py);
        d.set_item("pg_iters", c.pg_iters)?;
        d.set_item("alm_outer", c.alm_outer)?;
        d.set_item("apg_total", c.apg_total)?;
        d.set_item("pas_steps_total", c.pas_steps_total)?;
        d.set_item("chol_model_flops", c.chol_model_flops)?;
        d.set_item("qpoases_model_flops", c.qpoases_model_flops)?;
        Ok(d)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        io::write_result(&self.inner, &path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status={:?}, objective={}, eq_violation={:e})",
            self.status(),
            self.inner.objective,
            self.inner.eq_violation
        )
    }
}

/// A standard-form LP read from MPS, with the map back to the original
/// variables.
#[pyclass(name = "MpsModel", module = "qpas", frozen)]
pub struct PyMpsModel {
    inner: io::MpsModel,
}

#[pymethods]
impl PyMpsModel {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn lp(&self) -> PyLinearProgram {
        PyLinearProgram { inner: self.inner.lp.clone() }
    }

    #[getter]
    fn objective_offset(&self) -> f64 {
        self.inner.map.objective_offset
    }

    #[getter]
    fn var_names(&self) -> Vec<String> {
        self.inner.map.var_names.clone()
    }

    /// Original variables from a standard-form point.
    fn recover(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_len("x", self.inner.lp.n(), x.len())?;
        Ok(self.inner.map.recover(&x))
    }

    /// Objective of the original model at a standard-form point.
    fn original_objective(&self, x: Vec<f64>) -> PyResult<f64> {
        check_len("x", self.inner.lp.n(), x.len())?;
        Ok(self.inner.map.original_objective(&self.inner.lp, &x))
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> PyResult<()> {
    if expected == got {
        Ok(())
    } else {
        Err(QpasError::new_err(format!("{what} has length {got}, expected {expected}")))
    }
}

fn start(x0: Option<Vec<f64>>, n: usize) -> PyResult<Vec<f64>> {
    let x0 = x0.unwrap_or_else(|| vec![0.0; n]);
    check_len("x0", n, x0.len())?;
    Ok(x0)
}

fn problem_to_py(py: Python<'_>, problem: Problem) -> PyResult<Py<PyAny>> {
    Ok(match problem {
        Problem::Lp(inner) => Bound::new(py, PyLinearProgram { inner })?.into_any().unbind(),
        Problem::Scqp(inner) => Bound::new(py, PyScqp { inner })?.into_any().unbind(),
    })
}

fn problem_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Problem> {
    if let Ok(lp) = obj.extract::<PyRef<'_, PyLinearProgram>>() {
        return Ok(Problem::Lp(lp.inner.clone()));
    }
    if let Ok(qp) = obj.extract::<PyRef<'_, PyScqp>>() {
        return Ok(Problem::Scqp(qp.inner.clone()));
    }
    Err(PyTypeError::new_err("expected a LinearProgram or StronglyConvexQP"))
}

fn kkt_dict<'py>(py: Python<'py>, k: &KktReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("stationarity_residual", k.stationarity_residual)?;
    d.set_item("eq_violation", k.eq_violation)?;
    d.set_item("min_x", k.min_x)?;
    d.set_item("complementarity", k.complementarity)?;
    d.set_item("max_residual", k.max_residual())?;
    Ok(d)
}

/// Projected gradient solve of an LP from `x0` (zero by default).
#[pyfunction]
#[pyo3(signature = (lp, x0=None, alpha0=1.0, rho=2.0, alpha_max=1e6, f_tol=None, max_pg=1000, beta=None, tol=1e-10))]
#[allow(clippy::too_many_arguments)]
fn solve_lp(
    py: Python<'_>,
    lp: PyRef<'_, PyLinearProgram>,
    x0: Option<Vec<f64>>,
    alpha0: f64,
    rho: f64,
    alpha_max: f64,
    f_tol: Option<f64>,
    max_pg: usize,
    beta: Option<f64>,
    tol: f64,
) -> PyResult<PySolveResult> {
    let lp = lp.inner.clone();
    let x0 = start(x0, lp.n())?;
    let cfg = PgConfig {
        alpha0,
        rho,
        alpha_max,
        f_tol,
        max_pg,
        alm: AlmConfig { beta, tol, ..AlmConfig::default() },
    };
    let inner = py
        .detach(|| {
            let t = std::time::Instant::now();
            let out = pg_solve(&lp, &x0, &cfg)?;
            Ok(io::SolveResult::from_pg(&lp, &out, t.elapsed().as_secs_f64() * 1e3))
        })
        .map_err(err)?;
    Ok(PySolveResult { inner })
}

/// Augmented Lagrangian solve of an SCQP from `(x0, λ0)` (zero by default).
#[pyfunction]
#[pyo3(signature = (qp, x0=None, lambda0=None, beta=None, tol=1e-10, max_outer=100))]
fn solve_scqp(
    py: Python<'_>,
    qp: PyRef<'_, PyScqp>,
    x0: Option<Vec<f64>>,
    lambda0: Option<Vec<f64>>,
    beta: Option<f64>,
    tol: f64,
    max_outer: usize,
) -> PyResult<PySolveResult> {
    let qp = qp.inner.clone();
    let x0 = start(x0, qp.n())?;
    let lambda0 = lambda0.unwrap_or_else(|| vec![0.0; qp.m()]);
    check_len("lambda0", qp.m(), lambda0.len())?;
    let cfg = AlmConfig { beta, tol, max_outer, ..AlmConfig::default() };
    let inner = py
        .detach(|| {
            let t = std::time::Instant::now();
            let out = alm_solve(&qp, &x0, &lambda0, &cfg)?;
            Ok(io::SolveResult::from_alm(&qp, &out, t.elapsed().as_secs_f64() * 1e3))
        })
        .map_err(err)?;
    Ok(PySolveResult { inner })
}

/// Exact minimiser of a box QP by APG followed by path tracking. Returns
/// `(z, apg_iterations, committed_breakpoints)`.
#[pyfunction]
#[pyo3(signature = (p, start=None))]
fn solve_box_qp(py: Python<'_>, p: PyRef<'_, PyBoxQp>, start: Option<Vec<f64>>) -> PyResult<(Vec<f64>, usize, usize)> {
    let p = p.inner.clone();
    let z0 = self::start(start, p.n())?;
    let sol = py
        .detach(|| {
            let l = estimate_lipschitz(p.h(), 500);
            solve_box(&p, &z0, l, &ApgConfig::default(), &PasOptions::default())
        })
        .map_err(err)?;
    Ok((sol.z, sol.apg_iters, sol.track.committed))
}

/// Brute-force reference solution of a box QP with at most 20 variables.
#[pyfunction]
fn enumerate_box_qp(p: PyRef<'_, PyBoxQp>) -> PyResult<Vec<f64>> {
    oracle::enumerate_box_qp(&p.inner).map_err(err)
}

/// LP optimality certificate for a primal point and dual estimate.
#[pyfunction]
#[pyo3(signature = (lp, x, y, support_tol=1e-9))]
fn check_lp_kkt<'py>(
    py: Python<'py>,
    lp: PyRef<'_, PyLinearProgram>,
    x: Vec<f64>,
    y: Vec<f64>,
    support_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    check_len("x", lp.inner.n(), x.len())?;
    check_len("y", lp.inner.m(), y.len())?;
    let cert = lp_kkt(&lp.inner, &x, &y, support_tol);
    let d = kkt_dict(py, &cert.kkt)?;
    d.set_item("duality_gap", cert.duality_gap)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (qp, x, lam, support_tol=1e-9))]
fn check_scqp_kkt<'py>(
    py: Python<'py>,
    qp: PyRef<'_, PyScqp>,
    x: Vec<f64>,
    lam: Vec<f64>,
    support_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    check_len("x", qp.inner.n(), x.len())?;
    check_len("lam", qp.inner.m(), lam.len())?;
    kkt_dict(py, &scqp_kkt(&qp.inner, &x, &lam, support_tol))
}

/// Reads a JSON manifest.
#[pyfunction]
fn read_problem(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    problem_to_py(py, io::read_manifest(&path).map_err(err)?)
}

#[pyfunction]
fn write_problem(path: PathBuf, problem: &Bound<'_, PyAny>) -> PyResult<()> {
    io::write_manifest(&path, &problem_from_py(problem)?).map_err(err)
}

#[pyfunction]
fn read_mps(path: PathBuf) -> PyResult<PyMpsModel> {
    Ok(PyMpsModel { inner: io::read_mps(&path).map_err(err)? })
}

#[pyfunction]
fn read_result(path: PathBuf) -> PyResult<PySolveResult> {
    Ok(PySolveResult { inner: io::read_result(&path).map_err(err)? })
}

fn random_kind(kind: &str) -> PyResult<RandomKind> {
    match kind {
        "lp" => Ok(RandomKind::Lp),
        "scqp" => Ok(RandomKind::Scqp),
        other => Err(QpasError::new_err(format!("kind must be 'lp' or 'scqp', got {other:?}"))),
    }
}

/// Random instance from the benchmark recipe.
#[pyfunction]
#[pyo3(signature = (kind, m, n, q=None, density=0.1, seed=0))]
fn gen_random(py: Python<'_>, kind: &str, m: usize, n: usize, q: Option<usize>, density: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let spec = RandomSpec {
        kind: random_kind(kind)?,
        m,
        n,
        q: q.unwrap_or(n),
        density_a: density,
        density_b: density,
        seed,
    };
    problem_to_py(py, oracle::gen_random(&spec).map_err(err)?)
}

/// Instance with a known optimum: `(problem, x_star, y_star, optimum)`.
#[pyfunction]
#[pyo3(signature = (kind, m, n, seed=0, density=0.1))]
fn make_known(py: Python<'_>, kind: &str, m: usize, n: usize, seed: u64, density: f64) -> PyResult<(Py<PyAny>, Vec<f64>, Vec<f64>, f64)> {
    let inst = match random_kind(kind)? {
        RandomKind::Lp => oracle::make_known_lp(m, n, seed, density),
        RandomKind::Scqp => oracle::make_known_scqp(m, n, seed, density),
    }
    .map_err(err)?;
    let optimum = inst.optimum();
    Ok((problem_to_py(py, inst.problem)?, inst.x_star, inst.lambda_star, optimum))
}

#[pymodule]
fn qpas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QpasError", m.py().get_type::<QpasError>())?;
    m.add_class::<PyLinearProgram>()?;
    m.add_class::<PyScqp>()?;
    m.add_class::<PyBoxQp>()?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyMpsModel>()?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_scqp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_box_qp, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_box_qp, m)?)?;
    m.add_function(wrap_pyfunction!(check_lp_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(check_scqp_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(read_problem, m)?)?;
    m.add_function(wrap_pyfunction!(write_problem, m)?)?;
    m.add_function(wrap_pyfunction!(read_mps, m)?)?;
    m.add_function(wrap_pyfunction!(read_result, m)?)?;
    m.add_function(wrap_pyfunction!(gen_random, m)?)?;
    m.add_function(wrap_pyfunction!(make_known, m)?)?;
    Ok(())
}
