//! Shift-splitting preconditioners.
//!
//! The MGSS splitting of the saddle point matrix is `𝒜 = M - N` with
//!
//! ```text
//! M = 1/2 [ αI + A   B^T   ]      N = 1/2 [ αI - A   -B^T  ]
//!         [   -B   βI + C  ]              [    B    βI - C ]
//! ```
//!
//! and the relaxed variant (RMGSS) uses `P = [A B^T; -B βI + C]`.
//!
//! Both are applied by block elimination. With `S = βI + C` factored once by
//! Cholesky, `M z = r` is equivalent to `2M z = 2r`, whose second block row
//! gives `z2 = S^{-1}(2 r2 + B z1)`. Substituting into the first row leaves
//!
//! ```text
//! [(αI + A) + B^T S^{-1} B] z1 = 2 r1 - 2 B^T S^{-1} r2,
//! ```
//!
//! which is solved by inner restarted GMRES with the operator applied
//! matrix-free. RMGSS is the same elimination with no factor 2 and no α.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::krylov::{fgmres, LinearOperator, Preconditioner, SolveOptions};
use crate::sparse::{cholesky_factor, CholeskyFactor};
use crate::system::SaddlePointSystem;

/// Dense splitting assembly is refused above this many unknowns.
pub const DENSE_SPLITTING_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ShiftParams {
    fn default() -> Self {
        Self { alpha: 0.01, beta: 0.001 }
    }
}

impl ShiftParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shifts must be positive and finite, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Settings of the inner GMRES solve on the velocity Schur operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveConfig {
    pub restart: usize,
    /// Stop once the inner residual is below `reduction` times the inner right-hand side.
    pub reduction: f64,
    pub max_iters: usize,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        Self { restart: 10, reduction: 1e-2, max_iters: 40 }
    }
}

impl InnerSolveConfig {
    /// Near-exact inner solves, for checking the elimination itself.
    pub fn tight() -> Self {
        Self { restart: 50, reduction: 1e-12, max_iters: 5000 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidParameter("inner restart must be at least 1".into()));
        }
        if !(self.reduction > 0.0 && self.reduction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inner reduction must lie in (0, 1), got {}",
                self.reduction
            )));
        }
        if self.max_iters < self.restart {
            return Err(Error::InvalidParameter(format!(
                "inner max iterations ({}) must be at least the restart length ({})",
                self.max_iters, self.restart
            )));
        }
        Ok(())
    }
}

/// `v -> shift v + A v + B^T S^{-1} B v`
struct SchurOperator<'a> {
    sys: &'a SaddlePointSystem,
    factor: &'a CholeskyFactor,
    shift: f64,
}

impl LinearOperator for SchurOperator<'_> {
    fn dim(&self) -> usize {
        self.sys.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.sys.m()];
        self.sys.b().spmv_into(x, &mut t);
        self.factor.solve_in_place(&mut t);
        self.sys.a().spmv_into(x, y);
        if self.shift != 0.0 {
            y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += self.shift * xi);
        }
        self.sys.b().spmv_transpose_acc(1.0, &t, y);
    }
}

/// State shared by both variants: the bound system, the factor of
/// `βI + C` and the inner-solve bookkeeping.
#[derive(Debug, Clone)]
struct BlockElimination<'a> {
    sys: &'a SaddlePointSystem,
    factor: CholeskyFactor,
    cfg: InnerSolveConfig,
    /// α for MGSS, 0 for RMGSS.
    alpha_shift: f64,
    /// 2 for MGSS (absorbs the 1/2 in M), 1 for RMGSS.
    rhs_scale: f64,
    inner_iterations: usize,
    applications: usize,
    inexact_applications: usize,
}

impl<'a> BlockElimination<'a> {
    fn build(sys: &'a SaddlePointSystem, beta: f64, alpha_shift: f64, rhs_scale: f64, cfg: InnerSolveConfig) -> Result<Self> {
        cfg.validate()?;
        let shifted = sys.c().shifted(beta)?;
        let factor = cholesky_factor(&shifted)?;
        Ok(Self {
            sys,
            factor,
            cfg,
            alpha_shift,
            rhs_scale,
            inner_iterations: 0,
            applications: 0,
            inexact_applications: 0,
        })
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let n = self.sys.n();
        let (r1, r2) = r.split_at(n);
        let (z1, z2) = z.split_at_mut(n);
        let s = self.rhs_scale;

        let mut t = r2.to_vec();
        self.factor.solve_in_place(&mut t);
        let mut rhs: Vec<f64> = r1.iter().map(|v| s * v).collect();
        self.sys.b().spmv_transpose_acc(-s, &t, &mut rhs);

        let schur = SchurOperator { sys: self.sys, factor: &self.factor, shift: self.alpha_shift };
        let opts = SolveOptions {
            tol: self.cfg.reduction,
            max_iters: self.cfg.max_iters,
            restart: self.cfg.restart,
            initial_guess: None,
        };
        let (sol, rep) = fgmres(&schur, &rhs, None, &opts).expect("inner system dimensions are consistent");
        z1.copy_from_slice(&sol);
        self.inner_iterations += rep.outer_iterations;
        self.applications += 1;
        if !rep.converged {
            self.inexact_applications += 1;
        }

        // z2 = S^{-1} (s r2 + B z1)
        self.sys.b().spmv_into(z1, z2);
        z2.iter_mut().zip(r2).for_each(|(zi, ri)| *zi += s * ri);
        self.factor.solve_in_place(z2);
    }
}

/// The MGSS preconditioner `P = M_{α,β}`.
#[derive(Debug, Clone)]
pub struct MgssPreconditioner<'a> {
    params: ShiftParams,
    inner: BlockElimination<'a>,
}

/// The relaxed preconditioner `P = [A B^T; -B βI + C]`; `α` is unused.
#[derive(Debug, Clone)]
pub struct RmgssPreconditioner<'a> {
    params: ShiftParams,
    inner: BlockElimination<'a>,
}

/// Factors `βI + C` once; a factorization failure means `C` is not
/// positive semidefinite.
pub fn build_mgss<'a>(
    sys: &'a SaddlePointSystem,
    params: ShiftParams,
    cfg: InnerSolveConfig,
) -> Result<MgssPreconditioner<'a>> {
    params.validate()?;
    let inner = BlockElimination::build(sys, params.beta, params.alpha, 2.0, cfg)?;
    Ok(MgssPreconditioner { params, inner })
}

pub fn build_rmgss<'a>(
    sys: &'a SaddlePointSystem,
    params: ShiftParams,
    cfg: InnerSolveConfig,
) -> Result<RmgssPreconditioner<'a>> {
    params.validate()?;
    let inner = BlockElimination::build(sys, params.beta, 0.0, 1.0, cfg)?;
    Ok(RmgssPreconditioner { params, inner })
}

macro_rules! shift_preconditioner_impl {
    ($ty:ident) => {
        impl<'a> $ty<'a> {
            pub fn params(&self) -> ShiftParams {
                self.params
            }

            pub fn inner_config(&self) -> InnerSolveConfig {
                self.inner.cfg
            }

            pub fn factor(&self) -> &CholeskyFactor {
                &self.inner.factor
            }

            pub fn system(&self) -> &'a SaddlePointSystem {
                self.inner.sys
            }

            /// Number of completed applications.
            pub fn applications(&self) -> usize {
                self.inner.applications
            }

            /// Applications whose inner solve stopped at the iteration cap.
            pub fn inexact_applications(&self) -> usize {
                self.inner.inexact_applications
            }

            /// Checked application returning a fresh vector.
            pub fn solve(&mut self, r: &[f64]) -> Result<Vec<f64>> {
                check_len("preconditioner input", self.inner.sys.dim(), r.len())?;
                let mut z = vec![0.0; r.len()];
                self.inner.apply(r, &mut z);
                Ok(z)
            }
        }

        impl Preconditioner for $ty<'_> {
            fn dim(&self) -> usize {
                self.inner.sys.dim()
            }

            fn apply(&mut self, r: &[f64], z: &mut [f64]) {
                self.inner.apply(r, z);
            }

            fn inner_iterations(&self) -> usize {
                self.inner.inner_iterations
            }
        }
    };
}

shift_preconditioner_impl!(MgssPreconditioner);
shift_preconditioner_impl!(RmgssPreconditioner);

pub fn apply_mgss(p: &mut MgssPreconditioner<'_>, r: &[f64]) -> Result<Vec<f64>> {
    p.solve(r)
}

pub fn apply_rmgss(p: &mut RmgssPreconditioner<'_>, r: &[f64]) -> Result<Vec<f64>> {
    p.solve(r)
}

/// Dense `(M, N)` of the MGSS splitting, for verification-scale systems.
pub fn assemble_splitting_dense(sys: &SaddlePointSystem, params: ShiftParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    params.validate()?;
    let size = sys.dim();
    if size > DENSE_SPLITTING_CAP {
        return Err(Error::SizeCap { size, cap: DENSE_SPLITTING_CAP });
    }
    let (n, m) = (sys.n(), sys.m());
    let a = sys.a().to_dense();
    let b = sys.b().to_dense();
    let c = sys.c().to_dense();
    let id_n = DMatrix::<f64>::identity(n, n);
    let id_m = DMatrix::<f64>::identity(m, m);

    let mut mm = DMatrix::zeros(size, size);
    let mut nn = DMatrix::zeros(size, size);
    mm.view_mut((0, 0), (n, n)).copy_from(&((&id_n * params.alpha + &a) * 0.5));
    mm.view_mut((0, n), (n, m)).copy_from(&(b.transpose() * 0.5));
    mm.view_mut((n, 0), (m, n)).copy_from(&(&b * -0.5));
    mm.view_mut((n, n), (m, m)).copy_from(&((&id_m * params.beta + &c) * 0.5));

    nn.view_mut((0, 0), (n, n)).copy_from(&((&id_n * params.alpha - &a) * 0.5));
    nn.view_mut((0, n), (n, m)).copy_from(&(b.transpose() * -0.5));
    nn.view_mut((n, 0), (m, n)).copy_from(&(&b * 0.5));
    nn.view_mut((n, n), (m, m)).copy_from(&((&id_m * params.beta - &c) * 0.5));
    Ok((mm, nn))
}

/// Dense `[A B^T; -B βI + C]`.
pub fn assemble_rmgss_dense(sys: &SaddlePointSystem, params: ShiftParams) -> Result<DMatrix<f64>> {
    let size = sys.dim();
    if size > DENSE_SPLITTING_CAP {
        return Err(Error::SizeCap { size, cap: DENSE_SPLITTING_CAP });
    }
    let mut p = sys.to_dense();
    let n = sys.n();
    for i in n..size {
        p[(i, i)] += params.beta;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    fn hand_system() -> SaddlePointSystem {
        SaddlePointSystem::new(
            CsrMatrix::from_diagonal(&[2.0]),
            CsrMatrix::identity(1),
            CsrMatrix::zeros(1, 1),
            vec![0.0],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn factor_of_shifted_c() {
        let sys = hand_system();
        let p = build_mgss(&sys, ShiftParams::new(1.0, 1.0).unwrap(), InnerSolveConfig::default()).unwrap();
        assert_eq!(p.factor().lower_dense()[(0, 0)], 1.0);

        let sys1 = SaddlePointSystem::new(
            CsrMatrix::from_diagonal(&[2.0]),
            CsrMatrix::identity(1),
            CsrMatrix::identity(1),
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        let p = build_mgss(&sys1, ShiftParams::new(1.0, 1.0).unwrap(), InnerSolveConfig::default()).unwrap();
        assert!((p.factor().lower_dense()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn negative_c_is_reported() {
        let sys = SaddlePointSystem::new(
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::from_diagonal(&[1.0, -5.0]),
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .unwrap();
        let err = build_mgss(&sys, ShiftParams::default(), InnerSolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn hand_applies() {
        let sys = hand_system();
        let params = ShiftParams::new(1.0, 1.0).unwrap();
        let mut p = build_mgss(&sys, params, InnerSolveConfig::default()).unwrap();
        let z = apply_mgss(&mut p, &[1.0, 1.0]).unwrap();
        assert!((z[0] - 0.0).abs() < 1e-14 && (z[1] - 2.0).abs() < 1e-14, "{z:?}");
        assert_eq!(apply_mgss(&mut p, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let mut q = build_rmgss(&sys, params, InnerSolveConfig::default()).unwrap();
        let z = apply_rmgss(&mut q, &[1.0, 1.0]).unwrap();
        assert!((z[0] - 0.0).abs() < 1e-14 && (z[1] - 1.0).abs() < 1e-14, "{z:?}");
        assert_eq!(apply_rmgss(&mut q, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(apply_rmgss(&mut q, &[0.0]).is_err());
    }

    #[test]
    fn hand_splitting() {
        let (m, n) = assemble_splitting_dense(&hand_system(), ShiftParams::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.5, 0.5, -0.5, 0.5]));
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[-0.5, -0.5, 0.5, 0.5]));
    }

    #[test]
    fn splitting_is_linear_in_shifts() {
        let sys = hand_system();
        let (m1, _) = assemble_splitting_dense(&sys, ShiftParams::new(1.0, 1.0).unwrap()).unwrap();
        let (m2, _) = assemble_splitting_dense(&sys, ShiftParams::new(3.0, 5.0).unwrap()).unwrap();
        let d = m2 - m1;
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn parameter_validation() {
        assert!(ShiftParams::new(0.0, 1.0).is_err());
        assert!(ShiftParams::new(1.0, -1.0).is_err());
        assert!(ShiftParams::new(f64::NAN, 1.0).is_err());
        assert!(InnerSolveConfig { restart: 0, ..Default::default() }.validate().is_err());
        assert!(InnerSolveConfig { reduction: 1.0, ..Default::default() }.validate().is_err());
        assert!(InnerSolveConfig { max_iters: 5, ..Default::default() }.validate().is_err());
        assert!(InnerSolveConfig::default().validate().is_ok());
    }

    #[test]
    fn counter_counts_inner_arnoldi_steps() {
        let sys = crate::generate::generate_random(12, 5, 0.5, 4).unwrap();
        let mut p = build_mgss(&sys, ShiftParams::new(0.5, 0.5).unwrap(), InnerSolveConfig::default()).unwrap();
        let mut last = 0;
        for k in 0..5 {
            let r: Vec<f64> = (0..sys.dim()).map(|i| ((i + k) as f64).sin()).collect();
            p.solve(&r).unwrap();
            let now = p.inner_iterations();
            assert!(now > last && now - last <= 40);
            last = now;
        }
        assert_eq!(p.applications(), 5);
    }

    #[test]
    fn size_cap() {
        let sys = crate::generate::generate_oseen(&crate::generate::OseenSpec { grid: 26, ..Default::default() }).unwrap();
        assert!(matches!(
            assemble_splitting_dense(&sys, ShiftParams::default()),
            Err(Error::SizeCap { .. })
        ));
    }
}
