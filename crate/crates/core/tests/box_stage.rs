mod common;

use nalgebra::{DMatrix, DVector};
use qpas_core::alm::solve_box_qp;
use qpas_core::apg::{
    apg_step, build_homotopy, default_margin, estimate_lipschitz, filtrate, run_apg, ApgState,
};
use qpas_core::linalg::dist_inf;
use qpas_core::oracle::{enumerate_box_qp, projected_gradient_reference, random_box_qp};
use qpas_core::pas::PasState;
use qpas_core::{check_box_kkt, track, ApgConfig, BoxQP, PasOptions};

use common::{random_guess, recipe_box_qp};

#[test]
fn lipschitz_bounds_dense_spectrum() {
    for seed in 0..5 {
        let p = recipe_box_qp(10, 12, seed);
        let exact = p.h().clone().symmetric_eigen().eigenvalues.max();
        let l = estimate_lipschitz(p.h(), 500);
        assert!(l >= exact, "{l} < {exact}");
        assert!(l <= 1.02 * exact);
    }
}

#[test]
fn apg_approaches_oracle_optimum() {
    for seed in 0..10 {
        let p = recipe_box_qp(6, 8, 100 + seed);
        let opt = p.objective(&enumerate_box_qp(&p).unwrap());
        let l = estimate_lipschitz(p.h(), 500);
        let mut s = ApgState::new(&[0.0; 6]);
        for _ in 0..500 {
            apg_step(&mut s, &p, l, &ApgConfig::default());
        }
        assert!(p.objective(&s.y) - opt <= 1e-6);
    }
}

#[test]
fn homotopy_makes_guess_optimal() {
    for seed in 0..10 {
        let p = recipe_box_qp(6, 8, 200 + seed);
        let zhat = random_guess(6, seed);
        let w = build_homotopy(&p, &zhat, 0.1);
        let shifted: Vec<f64> = p.f().iter().zip(&w).map(|(a, b)| a + b).collect();
        let warm = p.with_linear_term(shifted).unwrap();
        assert!(check_box_kkt(&warm, &zhat, 0.0).stationarity_residual <= 1e-12);
    }
}

#[test]
fn initial_piece_matches_dense_solve() {
    for seed in 0..10 {
        let p = recipe_box_qp(6, 8, 300 + seed);
        let zhat = random_guess(6, seed);
        let w = build_homotopy(&p, &zhat, default_margin(p.f()));
        let s = PasState::init(&p, &w, &zhat).unwrap();
        let order = s.workset().order();
        let k = order.len();
        let hjj = DMatrix::from_fn(k, k, |a, b| p.h()[(order[a], order[b])]);
        let lu = hjj.lu();
        let u = lu.solve(&DVector::from_iterator(k, order.iter().map(|&j| -p.f()[j]))).unwrap();
        let v = lu.solve(&DVector::from_iterator(k, order.iter().map(|&j| w[j]))).unwrap();
        for a in 0..k {
            assert!((s.u()[a] - u[a]).abs() <= 1e-11);
            assert!((s.v()[a] - v[a]).abs() <= 1e-11);
        }
    }
}

fn support(z: &[f64]) -> Vec<bool> {
    z.iter().map(|&v| v > 1e-12).collect()
}

/// The first breakpoint below `t = 1` agrees with the first support change
/// of the exactly solved parametric problem on a `10⁻⁴` grid.
#[test]
fn first_breakpoint_matches_grid() {
    let mut seen = 0;
    for seed in 0..6 {
        let p = recipe_box_qp(6, 8, 400 + seed);
        let zhat = random_guess(6, seed);
        let w = build_homotopy(&p, &zhat, default_margin(p.f()));
        let at = |t: f64| {
            let f: Vec<f64> = p.f().iter().zip(&w).map(|(f, w)| f + t * w).collect();
            enumerate_box_qp(&p.with_linear_term(f).unwrap()).unwrap()
        };
        let start = support(&zhat);
        let mut grid_change = None;
        for k in 1..=10_000 {
            let t = 1.0 - k as f64 * 1e-4;
            if support(&at(t)) != start {
                grid_change = Some(t);
                break;
            }
        }
        let next = PasState::init(&p, &w, &zhat).unwrap().next_breakpoint();
        let t_hat = next.t_leave().max(next.t_enter());
        match grid_change {
            Some(t) => {
                assert!(t_hat >= t && t_hat < t + 1e-4, "grid {t}, tracked {t_hat}");
                seen += 1;
            }
            None => assert!(t_hat <= 1e-4, "tracked {t_hat} but support never changes"),
        }
    }
    assert!(seen > 0);
}

#[test]
fn tracking_matches_enumeration() {
    for seed in 0..100 {
        let p = recipe_box_qp(8, 10, 500 + seed);
        let zhat = random_guess(8, seed);
        let w = build_homotopy(&p, &zhat, default_margin(p.f()));
        let out = track(&p, &w, &zhat).unwrap();
        let exact = enumerate_box_qp(&p).unwrap();
        assert_eq!(support(&out.z), support(&exact), "seed {seed}");
        assert!(dist_inf(&out.z, &exact) <= 1e-9);
    }
}

#[test]
fn enumeration_agrees_with_projected_gradient_and_tracking() {
    for seed in 0..10 {
        let p = random_box_qp(10, 0.5, 600 + seed).unwrap();
        let exact = enumerate_box_qp(&p).unwrap();
        let reference = projected_gradient_reference(&p, 1e-13, 200_000).unwrap();
        assert!(dist_inf(&exact, &reference) <= 1e-10);
        let l = estimate_lipschitz(p.h(), 500);
        let z = solve_box_qp(&p, &[0.0; 10], l, &ApgConfig::default(), &PasOptions::default())
            .unwrap()
            .z;
        assert!(dist_inf(&exact, &z) <= 1e-9);
    }
}

#[test]
fn separable_problem_only_fixes_misfiltered_indices() {
    let n = 30;
    let diag: Vec<f64> = (0..n).map(|j| 1.0 + (j % 7) as f64).collect();
    let f: Vec<f64> = (0..n).map(|j| ((j * 37) % 11) as f64 - 5.0).collect();
    let p = BoxQP::new(DMatrix::from_diagonal(&DVector::from_vec(diag.clone())), f.clone()).unwrap();
    let exact: Vec<f64> = (0..n).map(|j| (-f[j] / diag[j]).max(0.0)).collect();
    let cfg = ApgConfig {
        max_iters: Some(3),
        ..ApgConfig::default()
    };
    let apg = run_apg(&p, &vec![0.0; n], estimate_lipschitz(p.h(), 500), &cfg);
    let zhat = filtrate(&apg.y, cfg.filter_tol);
    let wrong = (0..n).filter(|&j| (zhat[j] > 0.0) != (exact[j] > 0.0)).count();
    let w = build_homotopy(&p, &zhat, default_margin(&f));
    let out = track(&p, &w, &zhat).unwrap();
    assert!(dist_inf(&out.z, &exact) <= 1e-12);
    assert_eq!(out.committed, wrong);
    assert!(out.committed <= n);
}
