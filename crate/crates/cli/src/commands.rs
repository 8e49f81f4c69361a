use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use saddlekit::spectral::{sweep_instance, verify_instance, InstanceReport, PowerConfig, SweepConfig};
use saddlekit::{
    build_mgss, build_rmgss, fgmres, generate_oseen, stationary, CsrMatrix, Error, InnerSolveConfig, OseenSpec,
    Preconditioner, SaddlePointSystem, ShiftParams, SolveOptions, SolveReport, ValidationMode,
};
use serde::Serialize;

use crate::args::{BenchArgs, GenerateArgs, MethodKind, PrecondKind, SignConvention, SolveArgs, SolverArgs, VerifyArgs};
use crate::failure::{CmdResult, ExitStatus, Failure};
use crate::files::{load_system, save_system, write_file, write_json};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESIDUAL_CSV_HEADER: &str = "index,relative_residual";
pub const BENCH_CSV_HEADER: &str =
    "grid,n,m,method,iters,inner_iters,setup_seconds,solve_seconds,converged,final_relative_residual,error";

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    spec: &'a OseenSpec,
    seed: u64,
    sign_convention: SignConvention,
    n: usize,
    m: usize,
    nnz: Nnz,
    sha256: std::collections::BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Nnz {
    a: usize,
    b: usize,
    c: usize,
}

pub fn generate(args: &GenerateArgs) -> CmdResult {
    let spec = args.problem.spec();
    let sys = generate_oseen(&spec)?;
    let sums = save_system(&args.out, &sys, args.sign_convention)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        spec: &spec,
        seed: spec.seed,
        sign_convention: args.sign_convention,
        n: sys.n(),
        m: sys.m(),
        nnz: Nnz { a: sys.a().nnz(), b: sys.b().nnz(), c: sys.c().nnz() },
        sha256: sums.into_iter().collect(),
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    println!("wrote n={} m={} system to {}", sys.n(), sys.m(), args.out.display());
    Ok(ExitStatus::Success)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Source {
    Files { path: PathBuf, sign_convention: SignConvention },
    Generated { spec: OseenSpec },
}

#[derive(Serialize)]
struct SolveEcho<'a> {
    source: Source,
    solver: &'a SolverArgs,
}

#[derive(Serialize)]
struct SolveJson<'a> {
    schema_version: u32,
    converged: bool,
    outer_iters: usize,
    inner_iters_total: usize,
    setup_seconds: f64,
    solve_seconds: f64,
    final_relative_residual: f64,
    /// `||b - A x|| / ||b||` recomputed from the returned iterate.
    recomputed_relative_residual: f64,
    n: usize,
    m: usize,
    config: SolveEcho<'a>,
}

/// Result of one solve, with setup separated from iteration time.
pub struct RunOutcome {
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub setup_seconds: f64,
}

fn diverged(e: Error, dim: usize) -> Result<RunOutcome, Failure> {
    match e {
        Error::Diverged(report) => Ok(RunOutcome { solution: vec![f64::NAN; dim], report: *report, setup_seconds: 0.0 }),
        other => Err(other.into()),
    }
}

/// Builds the selected preconditioner and runs the selected method.
pub fn run_solver(
    sys: &SaddlePointSystem,
    method: MethodKind,
    precond: PrecondKind,
    params: ShiftParams,
    inner: InnerSolveConfig,
    opts: &SolveOptions,
) -> Result<RunOutcome, Failure> {
    if precond != PrecondKind::None {
        params.validate()?;
        inner.validate()?;
    }
    let rhs = sys.rhs();
    let clock = Instant::now();
    match (method, precond) {
        (MethodKind::Stationary, PrecondKind::Mgss) => {
            let mut p = build_mgss(sys, params, inner)?;
            let setup = clock.elapsed().as_secs_f64();
            match stationary::mgss_stationary_with(sys, &mut p, opts) {
                Ok((solution, report)) => Ok(RunOutcome { solution, report, setup_seconds: setup }),
                Err(e) => diverged(e, sys.dim()).map(|o| RunOutcome { setup_seconds: setup, ..o }),
            }
        }
        (MethodKind::Stationary, _) => {
            Err(Failure::config("the stationary method iterates with the MGSS splitting; use --precond mgss"))
        }
        (MethodKind::Gmres, PrecondKind::None) => {
            let (solution, report) = fgmres(sys, &rhs, None, opts)?;
            Ok(RunOutcome { solution, report, setup_seconds: 0.0 })
        }
        (MethodKind::Gmres, PrecondKind::Mgss) => {
            let mut p = build_mgss(sys, params, inner)?;
            let setup = clock.elapsed().as_secs_f64();
            let (solution, report) = fgmres(sys, &rhs, Some(&mut p as &mut dyn Preconditioner), opts)?;
            Ok(RunOutcome { solution, report, setup_seconds: setup })
        }
        (MethodKind::Gmres, PrecondKind::Rmgss) => {
            let mut p = build_rmgss(sys, params, inner)?;
            let setup = clock.elapsed().as_secs_f64();
            let (solution, report) = fgmres(sys, &rhs, Some(&mut p as &mut dyn Preconditioner), opts)?;
            Ok(RunOutcome { solution, report, setup_seconds: setup })
        }
    }
}

fn residual_csv(history: &[f64]) -> String {
    let mut out = String::from(RESIDUAL_CSV_HEADER);
    out.push('\n');
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{i},{r:e}");
    }
    out
}

pub fn solve(args: &SolveArgs) -> CmdResult {
    let (sys, source) = match &args.input {
        Some(dir) => (
            load_system(dir, args.sign_convention)?,
            Source::Files { path: dir.clone(), sign_convention: args.sign_convention },
        ),
        None => {
            let spec = args.problem.spec();
            (generate_oseen(&spec)?, Source::Generated { spec })
        }
    };
    let s = &args.solver;
    let opts = s.options();
    opts.validate()?;
    let params = ShiftParams { alpha: s.alpha, beta: s.beta };
    let run = run_solver(&sys, s.method, s.precond, params, s.inner(), &opts)?;
    let recomputed = if run.solution.iter().all(|v| v.is_finite()) {
        sys.relative_residual(&run.solution)?
    } else {
        f64::NAN
    };
    let report = SolveJson {
        schema_version: SCHEMA_VERSION,
        converged: run.report.converged,
        outer_iters: run.report.outer_iterations,
        inner_iters_total: run.report.inner_iterations,
        setup_seconds: run.setup_seconds,
        solve_seconds: run.report.solve_seconds,
        final_relative_residual: run.report.final_relative_residual(),
        recomputed_relative_residual: recomputed,
        n: sys.n(),
        m: sys.m(),
        config: SolveEcho { source, solver: s },
    };
    write_json(&args.out.join("report.json"), &report)?;
    write_file(&args.out.join("residuals.csv"), residual_csv(&run.report.residual_history).as_bytes())?;
    println!(
        "{} after {} outer iterations ({} inner), relative residual {:e}",
        if run.report.converged { "converged" } else { "not converged" },
        run.report.outer_iterations,
        run.report.inner_iterations,
        run.report.final_relative_residual()
    );
    Ok(if run.report.converged { ExitStatus::Success } else { ExitStatus::NotConverged })
}

pub fn hand_system() -> SaddlePointSystem {
    SaddlePointSystem::new(
        CsrMatrix::from_diagonal(&[2.0]),
        CsrMatrix::identity(1),
        CsrMatrix::zeros(1, 1),
        vec![0.0],
        vec![0.0],
    )
    .expect("hand system is well formed")
    .with_rhs_for_ones()
}

#[derive(Serialize)]
struct VerifySummary {
    instances: usize,
    cases: usize,
    failed_instances: usize,
    max_spectral_radius: f64,
}

#[derive(Serialize)]
struct VerifyJson {
    schema_version: u32,
    passed: bool,
    summary: VerifySummary,
    instances: Vec<InstanceReport>,
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::config("thread count must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    builder.build().map_err(|e| Failure::invariant(e.to_string()))
}

fn env_threads() -> Result<Option<usize>, Failure> {
    match std::env::var("SADDLEKIT_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::config(format!("SADDLEKIT_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let mut cfg = SweepConfig { instances: args.instances, max_dim: args.max_dim, seed: args.seed, ..Default::default() };
    let shifts = match (args.alpha, args.beta) {
        (Some(alpha), Some(beta)) => {
            cfg.shift_values = vec![alpha.min(beta)];
            vec![ShiftParams::new(alpha, beta)?]
        }
        _ => cfg.shift_pairs(),
    };
    cfg.validate()?;

    let single = if args.hand {
        Some(("hand-2x2".to_string(), hand_system()))
    } else if let Some(dir) = &args.input {
        Some((dir.display().to_string(), load_system(dir, args.sign_convention)?))
    } else {
        None
    };

    let instances = match single {
        Some((label, sys)) => {
            let rep = sys.validate(ValidationMode::Full)?;
            if !rep.passed() {
                let mut why = Vec::new();
                if !rep.a_positive_definite {
                    why.push(format!("symmetric part of A is not positive definite (min eigenvalue {:e})", rep.a_min_eigenvalue));
                }
                if !rep.c_positive_semidefinite {
                    why.push(format!("C is not positive semidefinite (min eigenvalue {:e})", rep.c_min_eigenvalue));
                }
                if rep.b_full_row_rank == Some(false) {
                    why.push(format!("B is rank deficient (rank {:?} of {})", rep.b_rank, sys.m()));
                }
                return Err(Failure::config(format!("{label}: system violates the hypotheses: {}", why.join("; "))));
            }
            vec![verify_instance(label, &sys, &shifts, &cfg.power, cfg.positive_real_trials)?]
        }
        None => {
            let pool = thread_pool(env_threads()?)?;
            pool.install(|| {
                (0..cfg.instances)
                    .into_par_iter()
                    .map(|k| {
                        let sys = sweep_instance(&cfg, k)?;
                        let power =
                            PowerConfig { seed: cfg.power.seed.wrapping_add(1000 * k as u64), ..cfg.power.clone() };
                        verify_instance(format!("random-{k}"), &sys, &shifts, &power, cfg.positive_real_trials)
                    })
                    .collect::<saddlekit::Result<Vec<_>>>()
            })?
        }
    };

    let failed = instances.iter().filter(|i| !i.passed()).count();
    let summary = VerifySummary {
        instances: instances.len(),
        cases: instances.iter().map(|i| i.cases.len()).sum(),
        failed_instances: failed,
        max_spectral_radius: instances.iter().map(InstanceReport::max_spectral_radius).fold(0.0, f64::max),
    };
    println!(
        "{} instances, {} (alpha, beta) cases, max spectral radius {:.12}, {} failed",
        summary.instances, summary.cases, summary.max_spectral_radius, failed
    );
    for inst in instances.iter().filter(|i| !i.passed()) {
        println!("  FAILED {}", inst.label);
    }
    let report = VerifyJson { schema_version: SCHEMA_VERSION, passed: failed == 0, summary, instances };
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(if failed == 0 { ExitStatus::Success } else { ExitStatus::Invariant })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    None,
    Mgss,
    Rmgss,
    Stationary,
}

impl BenchMethod {
    pub fn parse(s: &str) -> Result<Self, Failure> {
        match s.trim() {
            "none" => Ok(Self::None),
            "mgss" => Ok(Self::Mgss),
            "rmgss" => Ok(Self::Rmgss),
            "stationary" => Ok(Self::Stationary),
            other => Err(Failure::config(format!("unknown bench method {other:?}; expected none, mgss, rmgss or stationary"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Mgss => "mgss",
            Self::Rmgss => "rmgss",
            Self::Stationary => "stationary",
        }
    }

    fn kinds(self) -> (MethodKind, PrecondKind) {
        match self {
            Self::None => (MethodKind::Gmres, PrecondKind::None),
            Self::Mgss => (MethodKind::Gmres, PrecondKind::Mgss),
            Self::Rmgss => (MethodKind::Gmres, PrecondKind::Rmgss),
            Self::Stationary => (MethodKind::Stationary, PrecondKind::Mgss),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub grid: usize,
    pub n: usize,
    pub m: usize,
    pub method: BenchMethod,
    pub iters: usize,
    pub inner_iters: usize,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub converged: bool,
    pub final_relative_residual: f64,
    pub error: Option<String>,
}

fn bench_cell(args: &BenchArgs, grid: usize, method: BenchMethod) -> BenchRow {
    let spec = args.problem.spec_for_grid(grid);
    let mut row = BenchRow {
        grid,
        n: spec.n(),
        m: spec.m(),
        method,
        iters: 0,
        inner_iters: 0,
        setup_seconds: 0.0,
        solve_seconds: 0.0,
        converged: false,
        final_relative_residual: f64::NAN,
        error: None,
    };
    let (kind, precond) = method.kinds();
    let s = &args.solver;
    let result = generate_oseen(&spec).map_err(Failure::from).and_then(|sys| {
        run_solver(&sys, kind, precond, ShiftParams { alpha: s.alpha, beta: s.beta }, s.inner(), &s.options())
    });
    match result {
        Ok(run) => {
            row.iters = run.report.outer_iterations;
            row.inner_iters = run.report.inner_iterations;
            row.setup_seconds = run.setup_seconds;
            row.solve_seconds = run.report.solve_seconds;
            row.converged = run.report.converged;
            row.final_relative_residual = run.report.final_relative_residual();
        }
        Err(e) => row.error = Some(e.message),
    }
    row
}

pub fn bench_rows(args: &BenchArgs) -> Result<Vec<BenchRow>, Failure> {
    let methods = args
        .methods
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| BenchMethod::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(Failure::config("no bench methods given"));
    }
    if args.grids.is_empty() {
        return Err(Failure::config("no grids given"));
    }
    for &g in &args.grids {
        args.problem.spec_for_grid(g).validate()?;
    }
    args.solver.options().validate()?;
    let cells: Vec<(usize, BenchMethod)> =
        args.grids.iter().flat_map(|&g| methods.iter().map(move |&m| (g, m))).collect();
    let pool = thread_pool(args.threads)?;
    Ok(pool.install(|| cells.par_iter().map(|&(g, m)| bench_cell(args, g, m)).collect()))
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{},{:e},{}",
            r.grid,
            r.n,
            r.m,
            r.method.name(),
            r.iters,
            r.inner_iters,
            r.setup_seconds,
            r.solve_seconds,
            r.converged,
            r.final_relative_residual,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>5} {:>7} {:>6} {:>11} {:>7} {:>8} {:>9} {:>9} {:>5}\n",
        "grid", "n", "m", "method", "iters", "inner", "setup s", "solve s", "conv"
    );
    for r in rows {
        let _ = write!(
            out,
            "{:>5} {:>7} {:>6} {:>11} {:>7} {:>8} {:>9.3} {:>9.3} {:>5}",
            r.grid,
            r.n,
            r.m,
            r.method.name(),
            r.iters,
            r.inner_iters,
            r.setup_seconds,
            r.solve_seconds,
            if r.converged { "yes" } else { "no" }
        );
        if let Some(e) = &r.error {
            let _ = write!(out, "  error: {e}");
        }
        out.push('\n');
    }
    out
}

pub fn bench(args: &BenchArgs) -> CmdResult {
    let rows = bench_rows(args)?;
    print!("{}", bench_table(&rows));
    if let Some(dir) = &args.out {
        write_file(&dir.join("bench.csv"), bench_csv(&rows).as_bytes())?;
    }
    Ok(if rows.iter().all(|r| r.converged) { ExitStatus::Success } else { ExitStatus::NotConverged })
}
