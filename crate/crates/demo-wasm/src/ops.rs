//! Plain Rust versions of the exported operations, testable off the browser.

use saddlekit::spectral::{dense_iteration_matrix, spectral_radius_estimate, PowerConfig};
use saddlekit::{
    build_mgss, build_rmgss, fgmres, generate_oseen, InnerSolveConfig, OseenSpec, Preconditioner,
    SaddlePointSystem, ShiftParams, SolveOptions,
};
use serde::Serialize;

/// Largest grid for the dense spectral map; n + m = 3 p^2.
pub const MAX_MAP_GRID: usize = 8;
pub const MAX_MAP_STEPS: usize = 24;
pub const MAX_SOLVE_GRID: usize = 48;

fn system(grid: usize, nu: f64, stab: f64) -> Result<SaddlePointSystem, String> {
    let spec = OseenSpec { grid, viscosity: nu, stabilization: stab, ..OseenSpec::default() };
    generate_oseen(&spec).map_err(|e| e.to_string())
}

/// `steps` log-spaced values from `10^lo` to `10^hi`.
pub fn log_axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..steps).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (steps - 1) as f64)).collect()
}

/// Spectral radius of the MGSS iteration matrix on a `steps x steps`
/// log grid of shifts, row-major with `beta` along rows and `alpha` along columns.
pub fn spectral_radius_map(grid: usize, nu: f64, stab: f64, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, String> {
    if grid > MAX_MAP_GRID || steps == 0 || steps > MAX_MAP_STEPS || !(lo <= hi) {
        return Err(format!("need grid <= {MAX_MAP_GRID}, 1 <= steps <= {MAX_MAP_STEPS} and lo <= hi"));
    }
    let sys = system(grid, nu, stab)?;
    let axis = log_axis(lo, hi, steps);
    let power = PowerConfig { starts: 4, max_steps: 200, ..PowerConfig::default() };
    let mut out = Vec::with_capacity(steps * steps);
    for &beta in &axis {
        for &alpha in &axis {
            let gamma = dense_iteration_matrix(&sys, ShiftParams::new(alpha, beta).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            out.push(spectral_radius_estimate(&gamma, &power).spectral_radius);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct History {
    pub method: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub residuals: Vec<f64>,
}

/// Relative residual histories of restarted GMRES without a preconditioner,
/// with MGSS and with RMGSS.
pub fn residual_histories(grid: usize, nu: f64, stab: f64, alpha: f64, beta: f64) -> Result<Vec<History>, String> {
    if grid > MAX_SOLVE_GRID {
        return Err(format!("grid must be at most {MAX_SOLVE_GRID}"));
    }
    let sys = system(grid, nu, stab)?;
    let params = ShiftParams::new(alpha, beta).map_err(|e| e.to_string())?;
    let inner = InnerSolveConfig::default();
    let opts = SolveOptions { max_iters: 3000, ..SolveOptions::default() };
    let rhs = sys.rhs();
    let e = |e: saddlekit::Error| e.to_string();
    let mut mgss = build_mgss(&sys, params, inner).map_err(e)?;
    let mut rmgss = build_rmgss(&sys, params, inner).map_err(e)?;
    let runs: [(&'static str, Option<&mut dyn Preconditioner>); 3] =
        [("none", None), ("mgss", Some(&mut mgss)), ("rmgss", Some(&mut rmgss))];
    let mut out = Vec::with_capacity(3);
    for (method, p) in runs {
        let (_, report) = fgmres(&sys, &rhs, p, &opts).map_err(e)?;
        out.push(History {
            method,
            converged: report.converged,
            iterations: report.outer_iterations,
            inner_iterations: report.inner_iterations,
            residuals: report.residual_history,
        });
    }
    Ok(out)
}

/// Nonzero positions of the full block matrix as `[dim, r0, c0, r1, c1, ...]`.
pub fn sparsity_pattern(grid: usize, nu: f64, stab: f64) -> Result<Vec<u32>, String> {
    if grid > MAX_SOLVE_GRID {
        return Err(format!("grid must be at most {MAX_SOLVE_GRID}"));
    }
    let sys = system(grid, nu, stab)?;
    let n = sys.n();
    let mut out = vec![sys.dim() as u32];
    let mut push = |r: usize, c: usize| out.extend([r as u32, c as u32]);
    for (i, j, _) in sys.a().triplets() {
        push(i, j);
    }
    for (i, j, _) in sys.b().triplets() {
        push(j, n + i);
        push(n + i, j);
    }
    for (i, j, _) in sys.c().triplets() {
        push(n + i, n + j);
    }
    Ok(out)
}
