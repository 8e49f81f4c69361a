//! The generalized saddle point system
//!
//! ```text
//! [  A   B^T ] [x]   [ f ]
//! [ -B   C   ] [y] = [-g ]
//! ```
//!
//! with `A` (n x n) positive definite but possibly nonsymmetric, `C`
//! (m x m) symmetric positive semidefinite and `B` (m x n) of full row rank.
//! The minus signs on the second block row are part of the model: input in
//! the symmetric convention has to be converted with [`SaddlePointSystem::from_symmetric_form`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::krylov::LinearOperator;
use crate::sparse::CsrMatrix;
use crate::vecops::{dot, norm2};

/// Dense validation is refused above this many unknowns.
pub const FULL_VALIDATION_CAP: usize = 2000;

/// Relative threshold on the column-pivoted QR diagonal used to decide the rank of `B`.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePointSystem {
    a: CsrMatrix,
    b: CsrMatrix,
    c: CsrMatrix,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl SaddlePointSystem {
    /// Checks dimensions, `m <= n` and the symmetry of `C`. The definiteness
    /// and rank hypotheses are only checked by [`SaddlePointSystem::validate`].
    pub fn new(a: CsrMatrix, b: CsrMatrix, c: CsrMatrix, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b.nrows();
        if !a.is_square() {
            return Err(Error::NotSquare { nrows: a.nrows(), ncols: a.ncols() });
        }
        if !c.is_square() {
            return Err(Error::NotSquare { nrows: c.nrows(), ncols: c.ncols() });
        }
        if b.ncols() != n || c.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "blocks A {}x{}, B {}x{}, C {}x{} do not fit together",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if m > n {
            return Err(Error::DimensionMismatch(format!("B has more rows ({m}) than columns ({n})")));
        }
        check_len("f", n, f.len())?;
        check_len("g", m, g.len())?;
        c.check_symmetric()?;
        Ok(Self { a, b, c, f, g })
    }

    /// Converts the symmetric convention
    /// `[A Bs^T; Bs -C] (x; ys) = (f; gs)` into this model, which uses
    /// `B = -Bs`, `g = -gs` and the pressure `y = -ys`.
    pub fn from_symmetric_form(
        a: CsrMatrix,
        b_sym: CsrMatrix,
        c: CsrMatrix,
        f: Vec<f64>,
        g_sym: Vec<f64>,
    ) -> Result<Self> {
        let g = g_sym.iter().map(|v| -v).collect();
        Self::new(a, b_sym.scaled(-1.0), c, f, g)
    }

    /// Inverse of [`SaddlePointSystem::from_symmetric_form`]: returns `(Bs, gs)`.
    pub fn symmetric_form_blocks(&self) -> (CsrMatrix, Vec<f64>) {
        (self.b.scaled(-1.0), self.g.iter().map(|v| -v).collect())
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn c(&self) -> &CsrMatrix {
        &self.c
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Number of primary unknowns (rows of `A`).
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of constraint unknowns (rows of `B`).
    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n() + self.m()
    }

    /// `(A x + B^T y ; -B x + C y)`
    pub fn block_apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("block vector", self.dim(), u.len())?;
        let mut out = vec![0.0; self.dim()];
        self.block_apply_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn block_apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        let (x, y) = u.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        self.a.spmv_into(x, o1);
        self.b.spmv_transpose_acc(1.0, y, o1);
        self.c.spmv_into(y, o2);
        self.b.spmv_acc(-1.0, x, o2);
    }

    /// `b = (f ; -g)`
    pub fn rhs(&self) -> Vec<f64> {
        self.f.iter().copied().chain(self.g.iter().map(|v| -v)).collect()
    }

    /// `b - 𝒜 u`
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let au = self.block_apply(u)?;
        Ok(self.rhs().iter().zip(&au).map(|(b, a)| b - a).collect())
    }

    pub fn relative_residual(&self, u: &[f64]) -> Result<f64> {
        let r = self.residual(u)?;
        let bn = norm2(&self.rhs());
        Ok(if bn == 0.0 { norm2(&r) } else { norm2(&r) / bn })
    }

    /// Copy whose right-hand side makes the all-ones vector the exact
    /// solution: `f = A 1 + B^T 1`, `g = B 1 - C 1`.
    pub fn with_rhs_for_ones(&self) -> Self {
        let ones_n = vec![1.0; self.n()];
        let ones_m = vec![1.0; self.m()];
        let mut f = vec![0.0; self.n()];
        self.a.spmv_into(&ones_n, &mut f);
        self.b.spmv_transpose_acc(1.0, &ones_m, &mut f);
        let mut g = vec![0.0; self.m()];
        self.b.spmv_into(&ones_n, &mut g);
        self.c.spmv_acc(-1.0, &ones_m, &mut g);
        Self { f, g, ..self.clone() }
    }

    pub fn with_rhs(&self, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        check_len("f", self.n(), f.len())?;
        check_len("g", self.m(), g.len())?;
        Ok(Self { f, g, ..self.clone() })
    }

    /// Dense `[A B^T; -B C]`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut d = DMatrix::zeros(n + m, n + m);
        d.view_mut((0, 0), (n, n)).copy_from(&self.a.to_dense());
        let bd = self.b.to_dense();
        d.view_mut((0, n), (n, m)).copy_from(&bd.transpose());
        d.view_mut((n, 0), (m, n)).copy_from(&(-bd));
        d.view_mut((n, n), (m, m)).copy_from(&self.c.to_dense());
        d
    }

    /// Checks the structural hypotheses: `A` positive definite, `C`
    /// positive semidefinite, `B` of full row rank.
    pub fn validate(&self, mode: ValidationMode) -> Result<ValidationReport> {
        match mode {
            ValidationMode::Full => self.validate_full(),
            ValidationMode::Sampled { samples, seed } => Ok(self.validate_sampled(samples, seed)),
        }
    }

    fn validate_full(&self) -> Result<ValidationReport> {
        if self.dim() > FULL_VALIDATION_CAP {
            return Err(Error::SizeCap { size: self.dim(), cap: FULL_VALIDATION_CAP });
        }
        let ad = self.a.to_dense();
        let sym = (&ad + ad.transpose()) * 0.5;
        let min_a = min_symmetric_eigenvalue(sym);
        let cd = self.c.to_dense();
        let min_c = min_symmetric_eigenvalue(cd);
        let c_norm = self.c.frobenius_norm();

        let (rank, b_norm) = numerical_rank(&self.b.to_dense());
        let tol_c = 1e-12 * c_norm;
        Ok(ValidationReport {
            mode: ValidationMode::Full,
            a_min_eigenvalue: min_a,
            c_min_eigenvalue: min_c,
            b_rank: Some(rank),
            b_norm,
            a_positive_definite: min_a > 0.0,
            c_positive_semidefinite: min_c >= -tol_c,
            b_full_row_rank: Some(rank == self.m()),
        })
    }

    fn validate_sampled(&self, samples: usize, seed: u64) -> ValidationReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (self.n(), self.m());
        let c_norm = self.c.frobenius_norm();
        let mut min_a = f64::INFINITY;
        let mut min_c = f64::INFINITY;
        let mut c_ok = true;
        let mut a_ok = true;
        let mut tmp_n = vec![0.0; n];
        let mut tmp_m = vec![0.0; m];
        for _ in 0..samples {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            self.a.spmv_into(&v, &mut tmp_n);
            let q = dot(&v, &tmp_n);
            let vv = dot(&v, &v);
            a_ok &= q > 0.0;
            min_a = min_a.min(q / vv);

            if m > 0 {
                let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                self.c.spmv_into(&w, &mut tmp_m);
                let q = dot(&w, &tmp_m);
                let ww = dot(&w, &w);
                c_ok &= q >= -1e-12 * c_norm * ww;
                min_c = min_c.min(q / ww);
            }
        }
        if m == 0 {
            min_c = 0.0;
        }
        ValidationReport {
            mode: ValidationMode::Sampled { samples, seed },
            a_min_eigenvalue: min_a,
            c_min_eigenvalue: min_c,
            b_rank: None,
            b_norm: self.b.frobenius_norm(),
            a_positive_definite: a_ok,
            c_positive_semidefinite: c_ok,
            b_full_row_rank: None,
        }
    }
}

impl LinearOperator for SaddlePointSystem {
    fn dim(&self) -> usize {
        SaddlePointSystem::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.block_apply_into(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Dense eigen-decompositions and a column-pivoted QR; `n + m <= 2000`.
    Full,
    /// Random quadratic-form probes; the rank of `B` is not checked.
    Sampled { samples: usize, seed: u64 },
}

impl ValidationMode {
    pub fn sampled() -> Self {
        ValidationMode::Sampled { samples: 50, seed: 0 }
    }
}

/// In sampled mode the eigenvalue fields hold the smallest observed
/// Rayleigh quotients instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    /// Smallest eigenvalue of `(A + A^T) / 2`.
    pub a_min_eigenvalue: f64,
    pub c_min_eigenvalue: f64,
    pub b_rank: Option<usize>,
    pub b_norm: f64,
    pub a_positive_definite: bool,
    pub c_positive_semidefinite: bool,
    pub b_full_row_rank: Option<bool>,
}

impl ValidationReport {
    /// True when every check that was run passed.
    pub fn passed(&self) -> bool {
        self.a_positive_definite && self.c_positive_semidefinite && self.b_full_row_rank.unwrap_or(true)
    }
}

fn min_symmetric_eigenvalue(s: DMatrix<f64>) -> f64 {
    if s.nrows() == 0 {
        return 0.0;
    }
    s.symmetric_eigenvalues().min()
}

/// Rank of `b` from the column-pivoted QR of `b^T`, counting diagonal
/// entries above `RANK_RTOL * ||b||_F`. Returns `(rank, ||b||_F)`.
pub(crate) fn numerical_rank(b: &DMatrix<f64>) -> (usize, f64) {
    let norm = b.norm();
    if b.nrows() == 0 {
        return (0, norm);
    }
    if norm == 0.0 {
        return (0, 0.0);
    }
    let qr = b.transpose().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let rank = (0..k).filter(|&i| r[(i, i)].abs() > RANK_RTOL * norm).count();
    (rank, norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> SaddlePointSystem {
        SaddlePointSystem::new(
            CsrMatrix::identity(1),
            CsrMatrix::identity(1),
            CsrMatrix::zeros(1, 1),
            vec![0.0],
            vec![0.0],
        )
        .unwrap()
    }

    fn csr(rows: usize, cols: usize, vals: &[f64]) -> CsrMatrix {
        CsrMatrix::from_dense(&DMatrix::from_row_slice(rows, cols, vals), 0.0)
    }

    #[test]
    fn block_apply_by_hand() {
        let s = tiny();
        assert_eq!(s.block_apply(&[1.0, 1.0]).unwrap(), vec![2.0, -1.0]);
        assert_eq!(s.block_apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(s.block_apply(&[1.0]).is_err());
    }

    #[test]
    fn rhs_sign_convention() {
        let s = tiny().with_rhs(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(s.rhs(), vec![1.0, -1.0]);
        let s = tiny().with_rhs(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(s.rhs(), vec![1.0, 0.0]);
        let s = SaddlePointSystem::new(
            CsrMatrix::identity(2),
            csr(1, 2, &[1.0, 0.0]),
            CsrMatrix::zeros(1, 1),
            vec![2.0, 3.0],
            vec![5.0],
        )
        .unwrap();
        assert_eq!(s.rhs(), vec![2.0, 3.0, -5.0]);
    }

    #[test]
    fn rhs_for_ones_by_hand() {
        let s = tiny().with_rhs_for_ones();
        assert_eq!(s.f(), &[2.0]);
        assert_eq!(s.g(), &[1.0]);
        assert_eq!(s.block_apply(&[1.0, 1.0]).unwrap(), s.rhs());
        assert_eq!(s.residual(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.residual(&[0.0, 0.0]).unwrap(), s.rhs());
    }

    #[test]
    fn construction_errors() {
        let err = SaddlePointSystem::new(
            CsrMatrix::identity(1),
            CsrMatrix::identity(2).transpose(),
            CsrMatrix::zeros(2, 2),
            vec![0.0],
            vec![0.0; 2],
        );
        assert!(err.is_err());
        let asym = csr(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let err = SaddlePointSystem::new(
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            asym,
            vec![0.0; 2],
            vec![0.0; 2],
        );
        assert!(matches!(err, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn validation_by_hand() {
        let s = SaddlePointSystem::new(
            csr(2, 2, &[1.0, 1.0, -1.0, 1.0]),
            csr(1, 2, &[1.0, 0.0]),
            CsrMatrix::zeros(1, 1),
            vec![0.0; 2],
            vec![0.0],
        )
        .unwrap();
        let rep = s.validate(ValidationMode::Full).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.a_min_eigenvalue - 1.0).abs() < 1e-14);
        assert_eq!(rep.b_rank, Some(1));

        let neg = SaddlePointSystem::new(
            CsrMatrix::identity(2).scaled(-1.0),
            csr(1, 2, &[1.0, 0.0]),
            CsrMatrix::zeros(1, 1),
            vec![0.0; 2],
            vec![0.0],
        )
        .unwrap();
        let rep = neg.validate(ValidationMode::Full).unwrap();
        assert!(!rep.a_positive_definite && !rep.passed());
        assert!(!neg.validate(ValidationMode::sampled()).unwrap().a_positive_definite);

        let deficient = SaddlePointSystem::new(
            CsrMatrix::identity(3),
            csr(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            CsrMatrix::zeros(2, 2),
            vec![0.0; 3],
            vec![0.0; 2],
        )
        .unwrap();
        let rep = deficient.validate(ValidationMode::Full).unwrap();
        assert_eq!(rep.b_rank, Some(1));
        assert_eq!(rep.b_full_row_rank, Some(false));
    }

    #[test]
    fn sampled_validation_flags_indefinite_c() {
        let s = SaddlePointSystem::new(
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::identity(2).scaled(-1.0),
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .unwrap();
        let rep = s.validate(ValidationMode::sampled()).unwrap();
        assert!(rep.a_positive_definite && !rep.c_positive_semidefinite);
        assert_eq!(rep.b_full_row_rank, None);
    }

    #[test]
    fn symmetric_form_roundtrip_is_exact() {
        let s = tiny().with_rhs(vec![3.0], vec![0.25]).unwrap();
        let (bs, gs) = s.symmetric_form_blocks();
        let back = SaddlePointSystem::from_symmetric_form(s.a().clone(), bs, s.c().clone(), s.f().to_vec(), gs)
            .unwrap();
        assert_eq!(back, s);
    }
}
