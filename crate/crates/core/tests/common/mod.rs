#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use qpas_core::apg::{build_homotopy, default_margin, filtrate};
use qpas_core::io::{
    Counters, ProblemKind, ProblemManifest, ResultStatus, SolveResult,
};
use qpas_core::linalg::norm_inf;
use qpas_core::oracle::{seeded_rng, RandomKind, RandomSpec};
use qpas_core::pas::{Advance, PasState};
use qpas_core::{BoxQP, Problem};
use rand_distr::{Distribution, StandardNormal};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `H = BᵀB + 10⁻⁴I` with dense normal `B` (`q × n`), normal `f`.
pub fn recipe_box_qp(n: usize, q: usize, seed: u64) -> BoxQP {
    let mut rng = seeded_rng(seed);
    let b = DMatrix::from_fn(q, n, |_, _| StandardNormal.sample(&mut rng));
    let mut h: DMatrix<f64> = b.transpose() * &b;
    for i in 0..n {
        h[(i, i)] += 1e-4;
    }
    let h = (&h + h.transpose()) * 0.5;
    let f = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    BoxQP::new(h, f).unwrap()
}

/// Random nonnegative warm start with roughly half of the entries zero.
pub fn random_guess(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed ^ 0x9e37_79b9);
    let y: Vec<f64> = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v.max(0.0)
        })
        .collect();
    filtrate(&y, 1e-7)
}

fn tracked_states(p: &BoxQP, zhat: &[f64]) -> Result<Vec<(PasState, PasState)>, TestCaseError> {
    let w = build_homotopy(p, zhat, default_margin(p.f()));
    let mut state = PasState::init(p, &w, zhat).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut pairs = Vec::new();
    for _ in 0..50 * p.n() {
        let before = state.clone();
        match state.advance(p, &w) {
            Ok(Advance::Continue) => pairs.push((before, state.clone())),
            Ok(Advance::Finished(_)) => return Ok(pairs),
            // Degenerate updates are handled by restarts in the full tracker.
            Err(_) => return Ok(pairs),
        }
    }
    Err(TestCaseError::fail("path tracking did not finish"))
}

/// `z(t)` from the old piece and the new piece agree at every breakpoint.
pub fn check_path_continuity(n: usize, seed: u64) -> Result<usize, TestCaseError> {
    let p = recipe_box_qp(n, n + 2, seed);
    let zhat = random_guess(n, seed);
    let scale = 1.0 + norm_inf(p.f());
    let pairs = tracked_states(&p, &zhat)?;
    for (before, after) in &pairs {
        let t = after.t();
        let a = before.z_at(t);
        let b = after.z_at(t);
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-7 * scale, "jump {gap:e} at t = {t}");
    }
    Ok(pairs.len())
}

/// After each committed update, `z_J(t) ≥ 0` and `ψ − tφ ≥ 0` hold at the
/// breakpoint.
pub fn check_sign_conditions(n: usize, seed: u64) -> Result<usize, TestCaseError> {
    let p = recipe_box_qp(n, n + 2, seed);
    let zhat = random_guess(n, seed);
    let scale = 1.0 + norm_inf(p.f()) + norm_inf(&zhat);
    let mut checked = 0;
    for (_, after) in tracked_states(&p, &zhat)? {
        let Some(last) = after.breakpoint_log().last() else { continue };
        if !last.event.is_commit() {
            continue;
        }
        let t = after.t();
        let z = after.z_at(t);
        let min_z = after.workset().order().iter().map(|&j| z[j]).fold(0.0, f64::min);
        let min_g = after.complement_gradient_at(t).into_iter().fold(0.0, f64::min);
        prop_assert!(min_z >= -1e-8 * scale, "z_J = {min_z:e} at t = {t}");
        prop_assert!(min_g >= -1e-8 * scale, "gradient {min_g:e} at t = {t}");
        checked += 1;
    }
    Ok(checked)
}

pub fn check_filtrate_idempotent(y: &[f64], eta: f64) -> Result<(), TestCaseError> {
    let once = filtrate(y, eta);
    prop_assert_eq!(filtrate(&once, eta), once);
    Ok(())
}

pub fn check_manifest_round_trip(kind: RandomKind, m: usize, n: usize, seed: u64) -> Result<(), TestCaseError> {
    let spec = RandomSpec {
        kind,
        m,
        n,
        q: n,
        density_a: 0.5,
        density_b: 0.5,
        seed,
    };
    let inst = qpas_core::oracle::gen_random_instance(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut manifest = ProblemManifest::from_problem(&inst.problem);
    if let Some(b) = &inst.factor {
        manifest = manifest.with_factor(b, qpas_core::oracle::RECIPE_SHIFT);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    manifest.write(&path).unwrap();
    let back = ProblemManifest::read(&path).unwrap();
    prop_assert_eq!(&back, &manifest);
    let problem = back.to_problem(dir.path()).unwrap();
    prop_assert!(same_problem(&problem, &inst.problem));
    Ok(())
}

pub fn same_problem(a: &Problem, b: &Problem) -> bool {
    match (a, b) {
        (Problem::Lp(x), Problem::Lp(y)) => x.a() == y.a() && x.b() == y.b() && x.c() == y.c(),
        (Problem::Scqp(x), Problem::Scqp(y)) => {
            x.a() == y.a() && x.b() == y.b() && x.r() == y.r() && x.q() == y.q()
        }
        _ => false,
    }
}

pub fn check_result_round_trip(x: Vec<f64>, scalars: [f64; 4], counts: [usize; 4]) -> Result<(), TestCaseError> {
    let r = SolveResult {
        kind: ProblemKind::Scqp,
        status: ResultStatus::MaxIter,
        objective: scalars[0],
        eq_violation: scalars[1].abs(),
        kkt_stationarity: scalars[2].abs(),
        dual: x.iter().rev().copied().collect(),
        x,
        counters: Counters {
            pg_iters: counts[0],
            alm_outer: counts[1],
            apg_total: counts[2],
            pas_steps_total: counts[3],
            chol_model_flops: scalars[3].abs(),
            qpoases_model_flops: scalars[3].abs() / 2.0,
        },
        wall_ms: 3.5,
        message: None,
    };
    let text = r.to_json().unwrap();
    let back: SolveResult = serde_json::from_str(&text).unwrap();
    prop_assert_eq!(back, r);
    Ok(())
}

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}
