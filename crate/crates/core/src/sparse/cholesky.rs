//! Up-looking sparse Cholesky factorization `S = L L^T`.
//!
//! Row `k` of `L` is obtained from a sparse triangular solve against the
//! already computed leading block; its nonzero pattern is the reach of
//! column `k` of `S` in the elimination tree. No reordering is applied.

use nalgebra::DMatrix;

use super::CsrMatrix;
use crate::error::{check_len, Error, Result};

const NONE: usize = usize::MAX;

/// Lower-triangular Cholesky factor stored by columns; the diagonal entry
/// is the first entry of each column.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Factors a symmetric positive definite matrix.
///
/// Only the lower triangle of `s` is read during elimination, but the
/// whole matrix is checked for symmetry first.
pub fn cholesky_factor(s: &CsrMatrix) -> Result<CholeskyFactor> {
    if !s.is_square() {
        return Err(Error::NotSquare { nrows: s.nrows(), ncols: s.ncols() });
    }
    s.check_symmetric()?;
    let n = s.nrows();

    // elimination tree of S, using row k's lower entries as column k's upper entries
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        let (cols, _) = s.row(k);
        for &j in cols.iter().take_while(|&&j| j < k) {
            let mut i = j;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut work = vec![0.0; n];
    let mut mark = vec![NONE; n];
    let mut stack = vec![0usize; n];
    let mut path = Vec::with_capacity(n);

    for k in 0..n {
        // reach of row k in the elimination tree, in topological order
        let mut top = n;
        mark[k] = k;
        let (cols, vals) = s.row(k);
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j > k {
                break;
            }
            if j == k {
                diag = v;
                continue;
            }
            work[j] = v;
            path.clear();
            let mut i = j;
            while mark[i] != k {
                path.push(i);
                mark[i] = k;
                i = parent[i];
            }
            while let Some(i) = path.pop() {
                top -= 1;
                stack[top] = i;
            }
        }

        for &j in &stack[top..n] {
            let col = &columns[j];
            let ljk = work[j] / col[0].1;
            work[j] = 0.0;
            for &(i, lij) in &col[1..] {
                work[i] -= lij * ljk;
            }
            diag -= ljk * ljk;
            columns[j].push((k, ljk));
        }

        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { row: k, pivot: diag });
        }
        columns[k].push((k, diag.sqrt()));
    }

    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for col in columns {
        for (i, v) in col {
            row_idx.push(i);
            values.push(v);
        }
        col_ptr.push(row_idx.len());
    }
    Ok(CholeskyFactor { dim: n, col_ptr, row_idx, values })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("cholesky solve right-hand side", self.dim, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` with `(L L^T)^{-1} x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for j in 0..self.dim {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            let xj = x[j] / self.values[r.start];
            x[j] = xj;
            for k in r.start + 1..r.end {
                x[self.row_idx[k]] -= self.values[k] * xj;
            }
        }
        for j in (0..self.dim).rev() {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            let mut acc = x[j];
            for k in r.start + 1..r.end {
                acc -= self.values[k] * x[self.row_idx[k]];
            }
            x[j] = acc / self.values[r.start];
        }
    }

    pub fn lower_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                l[(self.row_idx[k], j)] = self.values[k];
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn csr(rows: &[&[f64]]) -> CsrMatrix {
        let d = DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat());
        CsrMatrix::from_dense(&d, 0.0)
    }

    /// Random sparse SPD matrix `G G^T + shift I` with `G` sparse.
    fn random_spd(rng: &mut ChaCha8Rng, m: usize, density: f64, shift: f64) -> CsrMatrix {
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if rng.gen::<f64>() < density {
                    g[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let mut s = &g * g.transpose();
        s = (&s + s.transpose()) * 0.5;
        for i in 0..m {
            s[(i, i)] += shift;
        }
        CsrMatrix::from_dense(&s, 0.0)
    }

    #[test]
    fn identity_factor() {
        let f = cholesky_factor(&CsrMatrix::identity(2)).unwrap();
        assert_eq!(f.lower_dense(), DMatrix::identity(2, 2));
        assert_eq!(f.solve(&[5.0, 7.0]).unwrap(), vec![5.0, 7.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        let f = cholesky_factor(&csr(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let l = f.lower_dense();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
        let z = f.solve(&[6.0, 5.0]).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let err = cholesky_factor(&csr(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
    }

    #[test]
    fn non_square_and_asymmetric_are_rejected() {
        assert!(matches!(
            cholesky_factor(&CsrMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            cholesky_factor(&csr(&[&[2.0, 1.0], &[0.0, 2.0]])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = cholesky_factor(&CsrMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(m, density) in &[(5, 0.5), (40, 0.1), (120, 0.03), (200, 0.02)] {
            let s = random_spd(&mut rng, m, density, 0.5);
            let l = cholesky_factor(&s).unwrap().lower_dense();
            let sd = s.to_dense();
            let err = (&l * l.transpose() - &sd).norm();
            assert!(err <= 1e-12 * sd.norm(), "m={m}: {err:e}");
        }
    }

    #[test]
    fn random_spd_solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_spd(&mut rng, 50, 0.1, 0.1);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = cholesky_factor(&s).unwrap().solve(&b).unwrap();
        let sz = s.spmv(&z).unwrap();
        let res: f64 = sz.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * bn);
    }

    #[test]
    fn diagonal_matrix_has_no_fill() {
        let f = cholesky_factor(&CsrMatrix::from_diagonal(&[4.0, 9.0, 16.0])).unwrap();
        assert_eq!(f.nnz(), 3);
        assert_eq!(f.solve(&[4.0, 9.0, 16.0]).unwrap(), vec![1.0, 1.0, 1.0]);
    }
}
