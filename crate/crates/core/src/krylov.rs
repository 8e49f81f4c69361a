//! Restarted flexible GMRES with right preconditioning.
//!
//! Each restart cycle builds an Arnoldi basis with modified Gram-Schmidt,
//! keeps the preconditioned directions `z_j = P^{-1} v_j` (so the
//! preconditioner may change from one application to the next), and solves
//! the small least-squares problem with Givens rotations. The true residual
//! `b - A x` is recomputed at the end of every cycle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sparse::CsrMatrix;
use crate::vecops::{all_finite, axpy, dot, norm2, scale};

/// A square linear map `x -> A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`; both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "a linear operator must be square");
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "a linear operator must be square");
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                axpy(xj, self.column(j).as_slice(), y);
            }
        }
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Approximate application of `P^{-1}`. Applications may differ from call
/// to call, which is why the outer solver is flexible.
pub trait Preconditioner {
    fn dim(&self) -> usize;

    /// Writes an approximation of `P^{-1} r` into `z`.
    fn apply(&mut self, r: &[f64], z: &mut [f64]);

    /// Cumulative inner iterations spent in `apply` so far.
    fn inner_iterations(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once `||b - A x|| < tol * ||b||`.
    pub tol: f64,
    /// Cap on Arnoldi steps (GMRES) or sweeps (stationary iteration).
    pub max_iters: usize,
    /// Krylov dimension per restart cycle.
    pub restart: usize,
    /// Zero vector when `None`.
    #[serde(skip)]
    pub initial_guess: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 10_000, restart: 30, initial_guess: None }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.restart == 0 {
            return Err(Error::InvalidParameter("restart length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Arnoldi steps for GMRES, sweeps for the stationary method.
    pub outer_iterations: usize,
    /// Inner Krylov steps spent inside the preconditioner.
    pub inner_iterations: usize,
    /// `||b - A x_k|| / ||b||`, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn final_relative_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

/// Wall clock that degrades to zero where `std::time::Instant` is unavailable.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if a == 0.0 {
        (0.0, b.signum())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `A x = b` with restarted flexible GMRES.
///
/// `precond = None` gives plain restarted GMRES. Reaching `max_iters` is
/// reported through `converged = false`, not as an error.
pub fn fgmres<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    mut precond: Option<&mut dyn Preconditioner>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    let n = op.dim();
    check_len("right-hand side", n, b.len())?;
    if let Some(p) = precond.as_deref() {
        check_len("preconditioner", n, p.dim())?;
    }
    if !all_finite(b) {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    let clock = Stopwatch::start();
    let inner_start = precond.as_deref().map_or(0, |p| p.inner_iterations());

    let mut x = match &opts.initial_guess {
        Some(x0) => {
            check_len("initial guess", n, x0.len())?;
            x0.clone()
        }
        None => vec![0.0; n],
    };

    let bnorm = norm2(b);
    let mut r = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64]| {
        op.apply(x, r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        norm2(r)
    };

    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((
            x,
            SolveReport {
                converged: true,
                outer_iterations: 0,
                inner_iterations: 0,
                residual_history: vec![0.0],
                solve_seconds: clock.seconds(),
            },
        ));
    }

    let mut beta = true_residual(&x, &mut r);
    let mut history = vec![beta / bnorm];
    let mut converged = history[0] < opts.tol;
    let mut iters = 0usize;

    let m = opts.restart.min(n.max(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(m);
    // column j of the Hessenberg matrix, already rotated into triangular form
    let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];

    while !converged && iters < opts.max_iters {
        basis.clear();
        dirs.clear();
        hcols.clear();
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut v0 = r.clone();
        scale(1.0 / beta, &mut v0);
        basis.push(v0);

        let mut steps = 0;
        let mut breakdown = false;
        while steps < m && iters < opts.max_iters {
            let j = steps;
            let mut z = vec![0.0; n];
            match precond.as_deref_mut() {
                Some(p) => p.apply(&basis[j], &mut z),
                None => z.copy_from_slice(&basis[j]),
            }
            op.apply(&z, &mut w);
            let wnorm0 = norm2(&w);

            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm2(&w);
            h[j + 1] = hnext;

            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            cs[j] = c;
            sn[j] = s;
            h[j] = c * h[j] + s * h[j + 1];
            h[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;

            hcols.push(h);
            dirs.push(z);
            steps += 1;
            iters += 1;

            let estimate = g[j + 1].abs() / bnorm;
            breakdown = hnext <= 1e-14 * wnorm0 || !hnext.is_finite();
            if estimate < opts.tol || breakdown || steps == m || iters >= opts.max_iters {
                break;
            }
            history.push(estimate);
            let mut next = w.clone();
            scale(1.0 / hnext, &mut next);
            basis.push(next);
        }

        // back substitution on the rotated Hessenberg matrix; columns with a
        // vanishing pivot (singular operator) are dropped
        let mut k = steps;
        let pivot_floor = 1e-14 * hcols.iter().map(|h| h.iter().fold(0.0f64, |a, v| a.max(v.abs()))).fold(0.0, f64::max);
        while k > 0 && hcols[k - 1][k - 1].abs() <= pivot_floor {
            k -= 1;
        }
        let mut y = g[..k].to_vec();
        for i in (0..k).rev() {
            for l in i + 1..k {
                y[i] -= hcols[l][i] * y[l];
            }
            y[i] /= hcols[i][i];
        }
        for (yi, z) in y.iter().zip(&dirs) {
            axpy(*yi, z, &mut x);
        }

        beta = true_residual(&x, &mut r);
        let rel = beta / bnorm;
        history.push(rel);
        converged = rel < opts.tol;
        if !rel.is_finite() {
            return Err(Error::NonFinite("GMRES residual".into()));
        }
        if breakdown && !converged && k < steps {
            // singular Hessenberg: the Krylov space cannot reduce the residual further
            break;
        }
    }

    let inner_iterations = precond.as_deref().map_or(0, |p| p.inner_iterations()) - inner_start;
    Ok((
        x,
        SolveReport {
            converged,
            outer_iterations: iters,
            inner_iterations,
            residual_history: history,
            solve_seconds: clock.seconds(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nonincreasing(h: &[f64]) -> bool {
        h.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let op = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 9.0];
        let (x, rep) = fgmres(&op, &b, None, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.outer_iterations, 1);
        assert_eq!(rep.residual_history.len(), 2);
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn three_distinct_eigenvalues_need_three_steps() {
        let op = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (x, rep) = fgmres(&op, &b, None, &SolveOptions::default()).unwrap();
            assert!(rep.converged && rep.outer_iterations <= 3);
            for i in 0..3 {
                assert!((x[i] * (i as f64 + 1.0) - b[i]).abs() < 1e-12);
            }
            assert!(nonincreasing(&rep.residual_history));
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let op = CsrMatrix::identity(3);
        let opts = SolveOptions { initial_guess: Some(vec![1.0; 3]), ..Default::default() };
        let (x, rep) = fgmres(&op, &[0.0; 3], None, &opts).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert!(rep.converged && rep.outer_iterations == 0);
    }

    #[test]
    fn restarts_on_nonsymmetric_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            for _ in 0..3 {
                trip.push((i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
            }
        }
        let op = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let opts = SolveOptions { restart: 5, ..Default::default() };
        let (x, rep) = fgmres(&op, &b, None, &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.outer_iterations > 5);
        assert_eq!(rep.residual_history.len(), rep.outer_iterations + 1);
        assert!(nonincreasing(&rep.residual_history));
        let r = crate::vecops::sub(&b, &op.spmv(&x).unwrap());
        assert!(norm2(&r) < 1e-9 * norm2(&b));
    }

    #[test]
    fn max_iterations_is_reported_not_raised() {
        let n = 50;
        let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let op = CsrMatrix::from_diagonal(&diag);
        let opts = SolveOptions { max_iters: 4, restart: 30, ..Default::default() };
        let (_, rep) = fgmres(&op, &vec![1.0; n], None, &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.outer_iterations, 4);
        assert!(rep.final_relative_residual() >= 1e-9);
    }

    #[test]
    fn singular_operator_does_not_crash() {
        let op = CsrMatrix::from_diagonal(&[1.0, 0.0, 2.0]);
        // not in the range of op
        let (x, rep) = fgmres(&op, &[1.0, 1.0, 1.0], None, &SolveOptions::default()).unwrap();
        assert!(!rep.converged);
        assert!(all_finite(&x));
        assert!(rep.residual_history.iter().all(|v| v.is_finite()));
        // in the range of op
        let (x, rep) = fgmres(&op, &[1.0, 0.0, 1.0], None, &SolveOptions::default()).unwrap();
        assert!(all_finite(&x));
        assert!(rep.converged);
    }

    #[test]
    fn invalid_input() {
        let op = CsrMatrix::identity(2);
        assert!(fgmres(&op, &[1.0], None, &SolveOptions::default()).is_err());
        assert!(fgmres(&op, &[1.0, f64::NAN], None, &SolveOptions::default()).is_err());
        let opts = SolveOptions { restart: 0, ..Default::default() };
        assert!(fgmres(&op, &[1.0, 1.0], None, &opts).is_err());
    }

    #[test]
    fn identity_preconditioner_matches_none() {
        let op = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = [1.0, 1.0, 2.0, -1.0, 0.5, 3.0];
        let opts = SolveOptions { restart: 2, ..Default::default() };
        let (x1, r1) = fgmres(&op, &b, None, &opts).unwrap();
        let mut id = IdentityPreconditioner(6);
        let (x2, r2) = fgmres(&op, &b, Some(&mut id), &opts).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(r1.residual_history, r2.residual_history);
    }
}
