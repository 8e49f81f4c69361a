use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saddlekit::{InnerSolveConfig, OseenSpec, Scaling, SolveOptions, Wind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "saddlekit", version, about = "Shift-splitting solvers for nonsymmetric saddle point systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an Oseen-type test system as Matrix Market files plus a manifest.
    Generate(GenerateArgs),
    /// Solve a generated or loaded system and write report.json and residuals.csv.
    Solve(SolveArgs),
    /// Check the convergence theory on random systems, the 2x2 hand system, or loaded files.
    Verify(VerifyArgs),
    /// Iteration counts and timings over a list of grids, one row per (grid, method).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `[A B^T; -B C] (x; y) = (f; -g)`, files hold `B` and `g`.
    Paper,
    /// `[A Bs^T; Bs -C] (x; ys) = (f; gs)`, files hold `Bs = -B` and `gs = -g`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    None,
    Mgss,
    Rmgss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Stationary,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindKind {
    Recirculating,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    Cell,
    Pointwise,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Interior grid points per side (n = 2 p^2, m = p^2).
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.02)]
    pub nu: f64,
    /// Pressure stabilization coefficient sigma in C = sigma h^2 I.
    #[arg(long, default_value_t = 0.1)]
    pub stab: f64,
    #[arg(long, value_enum, default_value_t = WindKind::Recirculating)]
    pub wind: WindKind,
    #[arg(long, value_enum, default_value_t = ScalingKind::Cell)]
    pub scaling: ScalingKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ProblemArgs {
    pub fn spec(&self) -> OseenSpec {
        self.spec_for_grid(self.grid)
    }

    pub fn spec_for_grid(&self, grid: usize) -> OseenSpec {
        OseenSpec {
            grid,
            viscosity: self.nu,
            stabilization: self.stab,
            wind: match self.wind {
                WindKind::Recirculating => Wind::Recirculating { strength: 1.0 },
                WindKind::None => Wind::Constant { wx: 0.0, wy: 0.0 },
            },
            scaling: match self.scaling {
                ScalingKind::Cell => Scaling::CellIntegrated,
                ScalingKind::Pointwise => Scaling::Pointwise,
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = PrecondKind::Mgss)]
    pub precond: PrecondKind,
    #[arg(long, value_enum, default_value_t = MethodKind::Gmres)]
    pub method: MethodKind,
    #[arg(long, default_value_t = 30)]
    pub restart: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub inner_restart: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub inner_reduction: f64,
    #[arg(long, default_value_t = 40)]
    pub inner_max: usize,
}

impl SolverArgs {
    pub fn options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iters: self.max_iters, restart: self.restart, initial_guess: None }
    }

    pub fn inner(&self) -> InnerSolveConfig {
        InnerSolveConfig { restart: self.inner_restart, reduction: self.inner_reduction, max_iters: self.inner_max }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = SignConvention::Paper)]
    pub sign_convention: SignConvention,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Directory with A.mtx, B.mtx, C.mtx, f.txt, g.txt. Without it a system
    /// is generated from the problem flags.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SignConvention::Paper)]
    pub sign_convention: SignConvention,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for report.json and residuals.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Verify the 2x2 system A = [2], B = [1], C = [0].
    #[arg(long, conflicts_with = "input")]
    pub hand: bool,
    /// Verify a system stored as in `generate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SignConvention::Paper)]
    pub sign_convention: SignConvention,
    /// Random instances in the sweep.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Largest n + m in the sweep.
    #[arg(long, default_value_t = 80)]
    pub max_dim: usize,
    /// Single shift pair; without both, every pair from {1e-3, 1e-2, 0.1, 1, 10}^2 is checked.
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 2015)]
    pub seed: u64,
    /// Where to write verify.json; stdout summary only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
    pub grids: Vec<usize>,
    /// Any of none, mgss, rmgss, stationary.
    #[arg(long, value_delimiter = ',', default_value = "none,mgss")]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for bench.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides SADDLEKIT_THREADS.
    #[arg(long, env = "SADDLEKIT_THREADS")]
    pub threads: Option<usize>,
}
