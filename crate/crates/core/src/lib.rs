//! Exact solvers for linear programs and strongly convex quadratic programs
//! in standard form.
//!
//! The LP `min cᵀx, Ax = b, x ≥ 0` is solved by projected gradient steps,
//! each projection being a strongly convex QP. Those are solved by an
//! augmented Lagrangian loop whose nonnegative box subproblems are solved
//! exactly: an accelerated projected gradient run guesses the support, and a
//! parametric active-set homotopy driven by an updatable Cholesky factor
//! turns the guess into the exact solution.

pub mod alm;
pub mod apg;
pub mod chol;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod pas;
pub mod pg;
pub mod problem;
pub mod sparse;

pub use alm::{alm_solve, AlmConfig, AlmOutcome, AlmSolver, AlmTrace, SolveStatus};
pub use apg::ApgConfig;
pub use chol::{CholFactor, WorkSet};
pub use error::{Error, Result};
pub use pas::{track, track_with, PasOptions, TrackOutcome};
pub use pg::{pg_solve, project_step, PgConfig, PgOutcome, PgTrace};
pub use problem::{
    build_box_qp, check_box_kkt, check_lp_kkt, check_scqp_kkt, BoxQP, KktReport, LinearProgram,
    Problem, StronglyConvexQP,
};
pub use sparse::{SparseMatrix, Triple};
