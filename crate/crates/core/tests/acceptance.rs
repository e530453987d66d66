//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any criterion fails. When `QPAS_ACCEPTANCE_REPORT` names
//! a file, a markdown summary with the seed table is written there.

mod common;

use std::cell::Cell;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use qpas_core::alm::solve_box_qp;
use qpas_core::apg::{apg_step, estimate_lipschitz, ApgState};
use qpas_core::linalg::{dist2, dist_inf};
use qpas_core::oracle::{
    enumerate_box_qp, gen_random, make_known_lp, make_known_scqp, seeded_rng, KnownSolutionInstance,
    RandomKind, RandomSpec,
};
use qpas_core::pg::{Projector, CERTIFICATE_SUPPORT_TOL};
use qpas_core::{
    alm_solve, check_lp_kkt, pg_solve, AlmConfig, ApgConfig, CholFactor, PasOptions, PgConfig,
    Problem, SolveStatus,
};
use rand::Rng;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

struct Row {
    id: &'static str,
    title: &'static str,
    seeds: &'static str,
    verdict: Verdict,
    elapsed: Duration,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(id: &'static str, title: &'static str, seeds: &'static str, f: fn() -> Verdict) -> Row {
    let start = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        verdict(false, format!("panicked: {msg}"))
    });
    let row = Row {
        id,
        title,
        seeds,
        verdict,
        elapsed: start.elapsed(),
    };
    println!(
        "[{}] {} {}: {} ({:.2} s)",
        if row.verdict.pass { "PASS" } else { "FAIL" },
        row.id,
        row.title,
        row.verdict.detail,
        row.elapsed.as_secs_f64()
    );
    row
}

fn within(limit_s: f64, start: Instant) -> bool {
    start.elapsed().as_secs_f64() < limit_s
}

fn pace(fast: bool) -> &'static str {
    if fast {
        "within"
    } else {
        "over"
    }
}

fn c1() -> Verdict {
    let start = Instant::now();
    let (mut ok, mut worst) = (0, 0.0f64);
    for k in 0..100u64 {
        let n = 2 + (k as usize % 11);
        let p = recipe_box_qp(n, n + 2, 1000 + k);
        let exact = enumerate_box_qp(&p).expect("oracle");
        let l = estimate_lipschitz(p.h(), 500);
        let z = solve_box_qp(&p, &vec![0.0; n], l, &ApgConfig::default(), &PasOptions::default())
            .expect("solve")
            .z;
        let err = dist_inf(&z, &exact);
        let same_support = z.iter().zip(&exact).all(|(a, b)| (*a > 0.0) == (*b > 0.0));
        worst = worst.max(err);
        if err <= 1e-9 && same_support {
            ok += 1;
        }
    }
    let fast = within(10.0, start);
    verdict(
        ok == 100 && fast,
        format!("{ok}/100 match, max |z - z*| = {worst:.2e}, {} the 10 s time limit", pace(fast)),
    )
}

fn c2() -> Verdict {
    let start = Instant::now();
    let n = 20;
    let (mut worst, mut worst_trip, mut ops) = (0.0f64, 0.0f64, 0usize);
    for s in 0..1000u64 {
        let mut rng = seeded_rng(2000 + s);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let h = m.transpose() * &m / n as f64 + DMatrix::identity(n, n) * 0.1;
        let h = (&h + h.transpose()) * 0.5;
        let mut f = CholFactor::empty(&h);
        let len = rng.random_range(1..=100);
        for _ in 0..len {
            let members = f.workset().order().to_vec();
            let grow = members.is_empty() || (members.len() < n && rng.random::<f64>() < 0.55);
            if grow {
                let free = f.workset().complement();
                let j = free[rng.random_range(0..free.len())];
                let before = f.r_dense();
                f.add_index(&h, j).expect("add");
                let mut trip = f.clone();
                trip.remove_index(&h, j).expect("remove");
                worst_trip = worst_trip.max((trip.r_dense() - before).norm());
            } else {
                let j = members[rng.random_range(0..members.len())];
                f.remove_index(&h, j).expect("remove");
            }
            ops += 1;
            let order = f.workset().order();
            let sub = DMatrix::from_fn(order.len(), order.len(), |a, b| h[(order[a], order[b])]);
            worst = worst.max((f.reconstruct() - sub).norm());
        }
    }
    let fast = within(30.0, start);
    verdict(
        worst <= 1e-9 && worst_trip <= 1e-14 && fast,
        format!(
            "{ops} updates, max ||R'R - H_JJ||_F = {worst:.2e} (tol 1e-9), add/remove round trip {worst_trip:.2e} (tol 1e-14), {} the 30 s time limit",
            pace(fast)
        ),
    )
}

fn c3() -> Verdict {
    let densities = [0.05, 0.1, 0.3, 0.5, 1.0];
    let mut cheaper = 0;
    let mut fractions = Vec::new();
    let mut ratios = Vec::new();
    for i in 0..10usize {
        let n = 500 + 50 * i;
        let spec = RandomSpec {
            kind: RandomKind::Scqp,
            m: n / 10,
            n,
            q: 2 * n,
            density_a: densities[i % 5],
            density_b: densities[i % 5],
            seed: 3000 + i as u64,
        };
        let Problem::Scqp(qp) = gen_random(&spec).expect("generator") else {
            unreachable!()
        };
        let out = alm_solve(&qp, &vec![0.0; n], &vec![0.0; qp.m()], &AlmConfig::default())
            .expect("solve");
        let (chol, qpo) = (out.trace.chol_flops(), out.trace.qpoases_flops());
        if chol <= qpo {
            cheaper += 1;
        }
        ratios.push(chol / qpo);
        let most = out.trace.records.iter().map(|r| r.pas_committed).max().unwrap_or(0);
        fractions.push(most as f64 / n as f64);
    }
    fractions.sort_by(f64::total_cmp);
    let median = 0.5 * (fractions[4] + fractions[5]);
    let ratio_list: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    verdict(
        cheaper >= 8 && median <= 0.1,
        format!(
            "sorted model <= qpOASES model on {cheaper}/10 (need 8), ratios [{}], median max committed steps per subproblem = {:.4} n (limit 0.1 n)",
            ratio_list.join(", "),
            median
        ),
    )
}

fn known_scqp(k: usize) -> KnownSolutionInstance {
    let m = 10 + k * 90 / 19;
    let n = (5 * m).min(500);
    make_known_scqp(m, n, 4000 + k as u64, 0.1).expect("generator")
}

fn c4() -> Verdict {
    let start = Instant::now();
    let (mut ok, mut worst_eq, mut worst_x, mut worst_ratio, mut most_outer) = (0, 0.0f64, 0.0f64, 0.0f64, 0);
    for k in 0..20 {
        let inst = known_scqp(k);
        let qp = inst.as_scqp().unwrap();
        let out = alm_solve(qp, &vec![0.0; qp.n()], &vec![0.0; qp.m()], &AlmConfig::default())
            .expect("solve");
        let eq = qp.eq_violation(&out.x);
        let err = dist_inf(&out.x, &inst.x_star);
        let outer = out.trace.records.len();
        let ratio = out
            .trace
            .records
            .windows(2)
            .map(|w| w[1].eq_violation / w[0].eq_violation)
            .fold(0.0, f64::max);
        worst_eq = worst_eq.max(eq);
        worst_x = worst_x.max(err);
        worst_ratio = worst_ratio.max(ratio);
        most_outer = most_outer.max(outer);
        if out.status == SolveStatus::Optimal && eq <= 1e-8 && err <= 1e-7 && outer <= 30 && ratio <= 0.5 {
            ok += 1;
        }
    }
    let fast = within(60.0, start);
    verdict(
        ok == 20 && fast,
        format!(
            "{ok}/20 pass, max ||Ax-b|| = {worst_eq:.2e}, max |x - x*| = {worst_x:.2e}, max outer = {most_outer}, max residual ratio = {worst_ratio:.3}, {} the 60 s time limit",
            pace(fast)
        ),
    )
}

fn known_lp(k: usize) -> KnownSolutionInstance {
    let m = 10 + k * 40 / 99;
    let n = (4 * m).min(200);
    make_known_lp(m, n, 5000 + k as u64, 0.1).expect("generator")
}

fn c5() -> Verdict {
    let start = Instant::now();
    let (mut ok, mut worst_gap, mut worst_eq, mut most_pg, mut rises) = (0, 0.0f64, 0.0f64, 0, 0);
    for k in 0..100 {
        let inst = known_lp(k);
        let lp = inst.as_lp().unwrap();
        let out = pg_solve(lp, &vec![0.0; lp.n()], &PgConfig::default()).expect("solve");
        let opt = inst.optimum();
        let gap = (lp.objective(&out.x) - opt).abs() / (1.0 + opt.abs());
        let eq = lp.eq_violation(&out.x);
        let recs = &out.trace.records;
        // Record 0 starts from an infeasible point. A step that moves x by at
        // most 1e-10 starts from a fixed point.
        let strict = recs.iter().skip(1).all(|r| r.moved <= 1e-10 || r.decrease > 0.0);
        if !strict {
            rises += 1;
        }
        worst_gap = worst_gap.max(gap);
        worst_eq = worst_eq.max(eq);
        most_pg = most_pg.max(recs.len());
        if out.status == SolveStatus::Optimal && gap <= 1e-6 && eq <= 1e-8 && strict && recs.len() <= 1000 {
            ok += 1;
        }
    }
    let fast = within(300.0, start);
    verdict(
        ok == 100 && fast,
        format!(
            "{ok}/100 pass, max rel gap = {worst_gap:.2e}, max ||Ax-b|| = {worst_eq:.2e}, max pg iterations = {most_pg}, non-monotone runs = {rises}, {} the 300 s time limit",
            pace(fast)
        ),
    )
}

fn c6() -> Verdict {
    let (mut fixed, mut certified, mut worst) = (0, 0, 0.0f64);
    for k in 0..100 {
        let inst = known_lp(k);
        let lp = inst.as_lp().unwrap();
        for alpha in [1.0, 10.0] {
            let mut proj = Projector::new(lp, AlmConfig::default()).expect("projector");
            let out = proj.project(&inst.x_star, alpha, &vec![0.0; lp.m()]).expect("project");
            if dist_inf(&out.x, &inst.x_star) > 1e-10 {
                continue;
            }
            fixed += 1;
            let y: Vec<f64> = out.lambda.iter().map(|l| l / alpha).collect();
            let cert = check_lp_kkt(lp, &inst.x_star, &y, CERTIFICATE_SUPPORT_TOL);
            let obj = lp.objective(&inst.x_star);
            worst = worst.max(cert.kkt.max_residual()).max(cert.duality_gap / (1.0 + obj.abs()));
            if cert.passes(1e-8, obj) {
                certified += 1;
            }
        }
    }
    verdict(
        fixed > 0 && certified == fixed,
        format!("{fixed}/200 projections of x* returned x*, {certified} certified (tol 1e-8), max residual {worst:.2e}"),
    )
}

fn c7() -> Verdict {
    let (mut ok, mut tightest) = (0, f64::INFINITY);
    for k in 0..20u64 {
        let n = 12;
        let p = recipe_box_qp(n, n + 2, 7000 + k);
        let exact = enumerate_box_qp(&p).expect("oracle");
        let opt = p.objective(&exact);
        let l = estimate_lipschitz(p.h(), 500);
        let z1 = vec![0.0; n];
        let d2 = dist2(&z1, &exact).powi(2);
        let cfg = ApgConfig::default();
        let mut state = ApgState::new(&z1);
        let mut all = true;
        for step in 1..=200 {
            apg_step(&mut state, &p, l, &cfg);
            let bound = 2.0 * l * d2 / ((step + 1) as f64).powi(2);
            let excess = p.objective(&state.y) - opt;
            // Roundoff allowance in the objective difference only.
            let slack = 1e-12 * (1.0 + opt.abs());
            if excess > bound + slack {
                all = false;
            }
            if bound > 0.0 {
                tightest = tightest.min((bound + slack - excess) / bound);
            }
        }
        if all {
            ok += 1;
        }
    }
    verdict(
        ok == 20,
        format!("{ok}/20 instances within 2L||z1 - z*||^2/(l+1)^2 for l <= 200, smallest relative margin {tightest:.3}"),
    )
}

fn c8() -> Verdict {
    let start = Instant::now();
    let model = qpas_core::io::read_mps(&fixture("afiro.mps")).expect("parse");
    let lp = &model.lp;
    let out = pg_solve(lp, &vec![0.0; lp.n()], &PgConfig::default()).expect("solve");
    let obj = model.map.original_objective(lp, &out.x);
    let reference = -464.753_142_857_1;
    let rel = (obj - reference).abs() / reference.abs();
    let fast = within(30.0, start);
    verdict(
        rel <= 1e-4 && fast,
        format!(
            "AFIRO {}x{} standard form, objective {obj:.10}, rel error {rel:.2e} (tol 1e-4), {} the 30 s time limit",
            lp.m(),
            lp.n(),
            pace(fast)
        ),
    )
}

fn runner() -> TestRunner {
    let cfg = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn c9() -> Verdict {
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    let continuity = Cell::new(0usize);
    let r = runner().run(&(2usize..10, any::<u64>()), |(n, seed)| {
        continuity.set(continuity.get() + check_path_continuity(n, seed)?);
        Ok(())
    });
    record("path continuity", r.map_err(|e| e.to_string()));
    let signs = Cell::new(0usize);
    let r = runner().run(&(2usize..10, any::<u64>()), |(n, seed)| {
        signs.set(signs.get() + check_sign_conditions(n, seed)?);
        Ok(())
    });
    record("sign conditions", r.map_err(|e| e.to_string()));
    let r = runner().run(
        &(prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e3, 0.0f64..1e-6], 0..40), 1e-12f64..0.5),
        |(y, eta)| check_filtrate_idempotent(&y, eta),
    );
    record("filtrate idempotence", r.map_err(|e| e.to_string()));
    let r = runner().run(
        &(any::<bool>(), 1usize..5, 1usize..8, any::<u64>()),
        |(scqp, m, n, seed)| {
            let kind = if scqp { RandomKind::Scqp } else { RandomKind::Lp };
            check_manifest_round_trip(kind, m, n, seed)
        },
    );
    record("manifest round trip", r.map_err(|e| e.to_string()));
    let r = runner().run(
        &(
            prop::collection::vec(finite(), 0..20),
            prop::array::uniform4(finite()),
            prop::array::uniform4(0usize..1_000_000),
        ),
        |(x, s, c)| check_result_round_trip(x, s, c),
    );
    record("result round trip", r.map_err(|e| e.to_string()));
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "5 suites x 1000 cases pass ({} breakpoints checked for continuity, {} committed breakpoints for sign conditions)",
                continuity.get(),
                signs.get()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; only a name
    // filter is honoured.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, &str, &str, fn() -> Verdict); 9] = [
        ("C1", "two-stage box QP exactness", "1000..1099", c1),
        ("C2", "Cholesky update fidelity", "2000..2999", c2),
        ("C3", "flop-model comparison", "3000..3009", c3),
        ("C4", "ALM exactness and feasibility band", "4000..4019", c4),
        ("C5", "PG finite termination", "5000..5099", c5),
        ("C6", "fixed-point soundness", "5000..5099", c6),
        ("C7", "APG rate bound", "7000..7019", c7),
        ("C8", "Netlib AFIRO", "-", c8),
        ("C9", "invariant suites", "proptest ChaCha deterministic", c9),
    ];
    let rows: Vec<Row> = criteria
        .iter()
        .filter(|(id, ..)| filter.as_deref().is_none_or(|f| id.eq_ignore_ascii_case(f)))
        .map(|&(id, title, seeds, f)| run(id, title, seeds, f))
        .collect();
    let failed = rows.iter().filter(|r| !r.verdict.pass).count();
    println!("acceptance: {} passed, {failed} failed", rows.len() - failed);

    if let Ok(path) = std::env::var("QPAS_ACCEPTANCE_REPORT") {
        let mut md = String::from("| criterion | result | detail | seeds |\n|---|---|---|---|\n");
        for r in &rows {
            let _ = writeln!(
                md,
                "| {} {} | {} | {} | {} |",
                r.id,
                r.title,
                if r.verdict.pass { "PASS" } else { "FAIL" },
                r.verdict.detail.replace('|', "\\|"),
                r.seeds
            );
        }
        std::fs::write(&path, md).expect("write report");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
