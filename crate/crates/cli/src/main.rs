mod bench;
mod input;
mod solve;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qpas_core::io::{read_result, write_result, Metadata, ProblemKind, ProblemManifest};
use qpas_core::oracle::{gen_random_instance, make_known_lp, make_known_scqp, RandomKind, RandomSpec, RECIPE_SHIFT};
use qpas_core::pg::CERTIFICATE_SUPPORT_TOL;
use qpas_core::{check_lp_kkt, check_scqp_kkt, Problem};

use solve::SolverOpts;

#[derive(Parser)]
#[command(name = "qpas", version, about = "LP and strongly convex QP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an LP (projected gradient) or SCQP (augmented Lagrangian).
    Solve(SolveArgs),
    /// Write a random or known-solution instance as a JSON manifest.
    Gen(GenArgs),
    /// Check a stored solution against the optimality conditions.
    Check(CheckArgs),
    /// Run a benchmark suite and write one CSV row per instance.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Lp,
    Scqp,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lp => ProblemKind::Lp,
            KindArg::Scqp => ProblemKind::Scqp,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// JSON manifest or MPS file.
    #[arg(long)]
    input: PathBuf,
    /// Fail unless the input holds this kind of problem.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[command(flatten)]
    solver: SolverOpts,
    /// `zero` or `file:<path>` with a JSON array or a result file.
    #[arg(long, default_value = "zero")]
    seedable_start: String,
    /// Also write the result here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Lp,
    Scqp,
    KnownLp,
    KnownScqp,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Rows of the factor of `Q`; defaults to `n`.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    input: PathBuf,
    /// Result file written by `solve`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Check(args) => cmd_check(args),
        Command::Bench(args) => bench::cmd_bench(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Writes one JSON document to standard output; a closed pipe is not an error.
fn emit(json: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{json}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let loaded = input::load(&args.input, args.kind.map(Into::into))?;
    let x0 = input::start_point(&args.seedable_start, loaded.problem.n())?;
    let result = solve::run(&loaded, &args.solver, &x0)?;
    let json = result.to_json()?;
    if let Some(out) = &args.out {
        write_result(&result, out)?;
    }
    emit(&json)?;
    Ok(solve::exit_code(&result))
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let (m, n) = (args.m, args.n);
    if m == 0 || n == 0 {
        bail!("m and n must be positive");
    }
    let q = args.q.unwrap_or(n);
    let generator = args.kind.to_possible_value().unwrap().get_name().to_string();
    let mut metadata = Metadata {
        name: Some(format!("{generator}-m{m}-n{n}-s{}", args.seed)),
        seed: Some(args.seed),
        generator: Some(generator),
        ..Metadata::default()
    };
    let manifest = match args.kind {
        GenKind::Lp | GenKind::Scqp => {
            let kind = if args.kind == GenKind::Lp { RandomKind::Lp } else { RandomKind::Scqp };
            let spec = RandomSpec {
                kind,
                m,
                n,
                q,
                density_a: args.density,
                density_b: args.density,
                seed: args.seed,
            };
            let inst = gen_random_instance(&spec)?;
            let manifest = ProblemManifest::from_problem(&inst.problem);
            match &inst.factor {
                Some(b) => manifest.with_factor(b, RECIPE_SHIFT),
                None => manifest,
            }
        }
        GenKind::KnownLp | GenKind::KnownScqp => {
            let inst = if args.kind == GenKind::KnownLp {
                make_known_lp(m, n, args.seed, args.density)?
            } else {
                make_known_scqp(m, n, args.seed, args.density)?
            };
            metadata.optimum = Some(inst.optimum());
            metadata.x_star = Some(inst.x_star.clone());
            metadata.y_star = Some(inst.lambda_star.clone());
            ProblemManifest::from_problem(&inst.problem)
        }
    };
    manifest
        .with_metadata(metadata)
        .write(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> Result<u8> {
    let loaded = input::load(&args.input, None)?;
    let result = read_result(&args.solution)?;
    let (m, n) = (loaded.problem.m(), loaded.problem.n());
    if result.x.len() != n {
        bail!("solution has {} entries in x, the problem has {n} variables", result.x.len());
    }
    if result.dual.len() != m {
        bail!("solution has {} dual entries, the problem has {m} constraints", result.dual.len());
    }
    let (json, pass) = match &loaded.problem {
        Problem::Lp(lp) => {
            let cert = check_lp_kkt(lp, &result.x, &result.dual, CERTIFICATE_SUPPORT_TOL);
            let pass = cert.passes(args.tol, lp.objective(&result.x));
            (serde_json::to_string_pretty(&cert)?, pass)
        }
        Problem::Scqp(qp) => {
            let report = check_scqp_kkt(qp, &result.x, &result.dual, CERTIFICATE_SUPPORT_TOL);
            (serde_json::to_string_pretty(&report)?, report.passes(args.tol))
        }
    };
    emit(&json)?;
    Ok(if pass { 0 } else { 2 })
}
