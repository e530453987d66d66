use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::Args;
use qpas_core::io::ProblemKind;
use qpas_core::oracle::{gen_random_instance, make_known_lp, make_known_scqp, RandomKind, RandomSpec};
use serde::Serialize;

use crate::input::{self, Loaded};
use crate::solve::{self, SolverOpts};

#[derive(Args)]
pub struct BenchArgs {
    /// `random-lp`, `random-scqp`, `known` or `dir:<path>`.
    #[arg(long)]
    suite: String,
    /// Comma-separated `MxN` or `MxNxQ`; ignored for `dir:` suites.
    #[arg(long, default_value = "")]
    sizes: String,
    /// Seeds `0..k` per size.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[command(flatten)]
    solver: SolverOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub m: usize,
    pub n: usize,
    pub q: Option<usize>,
}

pub fn parse_sizes(spec: &str) -> Result<Vec<Size>> {
    let mut sizes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let dims: Vec<usize> = part
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad size `{part}`, expected MxN or MxNxQ"))?;
        let size = match dims[..] {
            [m, n] => Size { m, n, q: None },
            [m, n, q] => Size { m, n, q: Some(q) },
            _ => bail!("bad size `{part}`, expected MxN or MxNxQ"),
        };
        if size.m == 0 || size.n == 0 || size.q == Some(0) {
            bail!("bad size `{part}`: dimensions must be positive");
        }
        sizes.push(size);
    }
    Ok(sizes)
}

/// One benchmark instance, generated or read when its row runs.
#[derive(Debug, Clone)]
enum Job {
    Random { kind: RandomKind, size: Size, seed: u64, density: f64 },
    Known { kind: ProblemKind, size: Size, seed: u64, density: f64 },
    File(PathBuf),
}

impl Job {
    fn label(&self) -> String {
        match self {
            Job::Random { kind, size, seed, .. } => {
                let k = if *kind == RandomKind::Lp { "random-lp" } else { "random-scqp" };
                format!("{k}-m{}-n{}-s{seed}", size.m, size.n)
            }
            Job::Known { kind, size, seed, .. } => {
                let k = if *kind == ProblemKind::Lp { "known-lp" } else { "known-scqp" };
                format!("{k}-m{}-n{}-s{seed}", size.m, size.n)
            }
            Job::File(p) => p.display().to_string(),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Job::Random { seed, .. } | Job::Known { seed, .. } => Some(*seed),
            Job::File(_) => None,
        }
    }

    fn load(&self) -> Result<Loaded> {
        let name = self.label();
        Ok(match *self {
            Job::Random { kind, size, seed, density } => {
                let spec = RandomSpec {
                    kind,
                    m: size.m,
                    n: size.n,
                    q: size.q.unwrap_or(size.n),
                    density_a: density,
                    density_b: density,
                    seed,
                };
                Loaded { name, problem: gen_random_instance(&spec)?.problem, map: None, reference: None }
            }
            Job::Known { kind, size, seed, density } => {
                let inst = match kind {
                    ProblemKind::Lp => make_known_lp(size.m, size.n, seed, density)?,
                    ProblemKind::Scqp => make_known_scqp(size.m, size.n, seed, density)?,
                };
                let reference = Some(inst.optimum());
                Loaded { name, problem: inst.problem, map: None, reference }
            }
            Job::File(ref path) => input::load(path, None)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub status: String,
    pub wall_ms: Option<f64>,
    pub objective: Option<f64>,
    pub eq_violation: Option<f64>,
    /// `|objective − reference| / (1 + |reference|)`
    pub objective_gap: Option<f64>,
    pub pg_iters: Option<usize>,
    pub alm_outer: Option<usize>,
    pub apg_total: Option<usize>,
    pub pas_steps: Option<usize>,
    pub chol_model_flops: Option<f64>,
    pub qpoases_model_flops: Option<f64>,
    /// `chol_model_flops / qpoases_model_flops`
    pub flop_ratio: Option<f64>,
    pub error: Option<String>,
}

fn kind_name(kind: ProblemKind) -> String {
    match kind {
        ProblemKind::Lp => "lp".into(),
        ProblemKind::Scqp => "scqp".into(),
    }
}

fn run_job(job: &Job, opts: &SolverOpts) -> BenchRow {
    let mut row = BenchRow {
        problem: job.label(),
        kind: String::new(),
        m: 0,
        n: 0,
        seed: job.seed(),
        status: "error".into(),
        wall_ms: None,
        objective: None,
        eq_violation: None,
        objective_gap: None,
        pg_iters: None,
        alm_outer: None,
        apg_total: None,
        pas_steps: None,
        chol_model_flops: None,
        qpoases_model_flops: None,
        flop_ratio: None,
        error: None,
    };
    let loaded = match job.load() {
        Ok(l) => l,
        Err(e) => {
            row.error = Some(format!("{e:#}"));
            return row;
        }
    };
    row.problem = loaded.name.clone();
    row.kind = kind_name(loaded.kind());
    row.m = loaded.problem.m();
    row.n = loaded.problem.n();
    let x0 = vec![0.0; row.n];
    match solve::run(&loaded, opts, &x0) {
        Ok(r) => {
            let c = &r.counters;
            row.status = serde_json::to_value(r.status)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            row.wall_ms = Some(r.wall_ms);
            row.objective = Some(r.objective);
            row.eq_violation = Some(r.eq_violation);
            row.objective_gap = loaded.reference.map(|f| (r.objective - f).abs() / (1.0 + f.abs()));
            row.pg_iters = Some(c.pg_iters);
            row.alm_outer = Some(c.alm_outer);
            row.apg_total = Some(c.apg_total);
            row.pas_steps = Some(c.pas_steps_total);
            row.chol_model_flops = Some(c.chol_model_flops);
            row.qpoases_model_flops = Some(c.qpoases_model_flops);
            row.flop_ratio = (c.qpoases_model_flops > 0.0)
                .then(|| c.chol_model_flops / c.qpoases_model_flops);
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

fn jobs(args: &BenchArgs) -> Result<Vec<Job>> {
    if let Some(dir) = args.suite.strip_prefix("dir:") {
        return dir_jobs(Path::new(dir));
    }
    let sizes = parse_sizes(&args.sizes)?;
    if sizes.is_empty() {
        bail!("--sizes is required for the `{}` suite", args.suite);
    }
    let density = args.density;
    let mut jobs = Vec::new();
    for &size in &sizes {
        for seed in 0..args.seeds {
            match args.suite.as_str() {
                "random-lp" => jobs.push(Job::Random { kind: RandomKind::Lp, size, seed, density }),
                "random-scqp" => jobs.push(Job::Random { kind: RandomKind::Scqp, size, seed, density }),
                "known" => {
                    jobs.push(Job::Known { kind: ProblemKind::Lp, size, seed, density });
                    jobs.push(Job::Known { kind: ProblemKind::Scqp, size, seed, density });
                }
                other => bail!("unknown suite `{other}`"),
            }
        }
    }
    Ok(jobs)
}

fn dir_jobs(dir: &Path) -> Result<Vec<Job>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("json") || e.eq_ignore_ascii_case("mps"))
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(Job::File).collect())
}

fn thread_count() -> usize {
    std::env::var("QPAS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Rows come back in job order whatever the thread count.
fn run_all(jobs: &[Job], opts: &SolverOpts, threads: usize) -> Vec<BenchRow> {
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..threads.min(jobs.len()).max(1) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let row = run_job(job, opts);
                rows.lock().unwrap()[k] = Some(row);
            });
        }
    });
    rows.into_inner().unwrap().into_iter().map(|r| r.expect("every job runs")).collect()
}

pub fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let jobs = jobs(&args)?;
    let rows = run_all(&jobs, &args.solver, thread_count());
    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    let failed = rows.iter().filter(|r| r.status != "optimal").count();
    eprintln!("{} rows written to {}, {failed} not optimal", rows.len(), args.out.display());
    Ok(0)
}
