//! The MGSS stationary iteration `M u_{k+1} = N u_k + b`.
//!
//! Because `M - N = 𝒜`, each sweep is carried out in residual-correction
//! form `u_{k+1} = u_k + M^{-1} (b - 𝒜 u_k)`, with `M^{-1}` applied by the
//! MGSS preconditioner.

use crate::error::{check_len, Error, Result};
use crate::krylov::{Preconditioner, SolveOptions, SolveReport, Stopwatch};
use crate::precond::{build_mgss, InnerSolveConfig, MgssPreconditioner, ShiftParams};
use crate::system::SaddlePointSystem;
use crate::vecops::{all_finite, axpy, norm2};

/// Relative residual beyond which the iteration is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

pub fn mgss_stationary(
    sys: &SaddlePointSystem,
    params: ShiftParams,
    cfg: InnerSolveConfig,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut precond = build_mgss(sys, params, cfg)?;
    mgss_stationary_with(sys, &mut precond, opts)
}

/// Runs the iteration with an already built preconditioner, so that setup
/// time stays out of the reported solve time.
pub fn mgss_stationary_with(
    sys: &SaddlePointSystem,
    precond: &mut MgssPreconditioner<'_>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    let dim = sys.dim();
    check_len("preconditioner", dim, Preconditioner::dim(precond))?;
    let clock = Stopwatch::start();
    let inner_start = precond.inner_iterations();

    let mut u = match &opts.initial_guess {
        Some(u0) => {
            check_len("initial guess", dim, u0.len())?;
            u0.clone()
        }
        None => vec![0.0; dim],
    };
    let b = sys.rhs();
    let bnorm = norm2(&b);
    let scale = if bnorm == 0.0 { 1.0 } else { bnorm };

    let mut r = sys.residual(&u)?;
    let mut history = vec![norm2(&r) / scale];
    let mut converged = history[0] < opts.tol;
    let mut z = vec![0.0; dim];
    let mut iters = 0;

    while !converged && iters < opts.max_iters {
        precond.apply(&r, &mut z);
        axpy(1.0, &z, &mut u);
        iters += 1;
        r = sys.residual(&u)?;
        let rel = norm2(&r) / scale;
        history.push(rel);
        converged = rel < opts.tol;
        if !rel.is_finite() || rel > DIVERGENCE_THRESHOLD || !all_finite(&u) {
            return Err(Error::Diverged(Box::new(SolveReport {
                converged: false,
                outer_iterations: iters,
                inner_iterations: precond.inner_iterations() - inner_start,
                residual_history: history,
                solve_seconds: clock.seconds(),
            })));
        }
    }

    Ok((
        u,
        SolveReport {
            converged,
            outer_iterations: iters,
            inner_iterations: precond.inner_iterations() - inner_start,
            residual_history: history,
            solve_seconds: clock.seconds(),
        },
    ))
}
