//! Compressed sparse row matrices and the primitives built on them.
//!
//! Every operator in the crate (the saddle point blocks, the Schur operator
//! used by the preconditioners) reduces to row-oriented products `M x` and
//! transpose products `M^T x`, so CSR is the only storage format.

mod cholesky;
mod mtx;

pub use cholesky::{cholesky_factor, CholeskyFactor};
pub use mtx::{read_matrix_market, read_vector, write_matrix_market, write_vector};

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Tolerance used when deciding whether a matrix is symmetric:
/// `max |S - S^T| <= SYMMETRY_RTOL * max |S|`.
pub const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn try_new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row offsets have length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::InvalidStructure("first row offset must be 0".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidStructure(
                "last row offset must equal the number of stored entries".into(),
            ));
        }
        for i in 0..nrows {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if start > end {
                return Err(Error::InvalidStructure(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_idx[start..end];
            if cols.iter().any(|&j| j >= ncols) {
                return Err(Error::InvalidStructure(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Repeated
    /// positions are summed, so the result never stores duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in &row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Converts a dense matrix, storing only entries with `|a_ij| > drop_tol`.
    pub fn from_dense(dense: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut trip = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v.abs() > drop_tol {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), &trip).expect("indices are in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv input", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = M x` without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y += s * M x`
    pub fn spmv_acc(&self, s: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += s * acc;
        }
    }

    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("transpose spmv input", self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        self.spmv_transpose_acc(1.0, x, &mut y);
        Ok(y)
    }

    /// `y += s * M^T x`, scattering row by row.
    pub fn spmv_transpose_acc(&self, s: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let sx = s * xi;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * sx;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.triplets() {
            col_idx[next[j]] = i;
            values[next[j]] = v;
            next[j] += 1;
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr: counts, col_idx, values }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `M + shift * I` for square `M`, inserting diagonal entries as needed.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare { nrows: self.nrows, ncols: self.ncols });
        }
        let mut trip: Vec<_> = self.triplets().collect();
        trip.extend((0..self.nrows).map(|i| (i, i, shift)));
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut trip: Vec<_> = self.triplets().collect();
        trip.extend(other.triplets().map(|(i, j, v)| (i, j, s * v)));
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |M - M^T|` over all positions; `M` must be square.
    pub fn max_asymmetry(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare { nrows: self.nrows, ncols: self.ncols });
        }
        let t = self.transpose();
        let diff = self.add_scaled(-1.0, &t)?;
        Ok(diff.max_abs())
    }

    /// Errors unless `max |M - M^T| <= SYMMETRY_RTOL * max |M|`.
    pub fn check_symmetric(&self) -> Result<()> {
        let asymmetry = self.max_asymmetry()?;
        let tolerance = SYMMETRY_RTOL * self.max_abs();
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric { asymmetry, tolerance });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, density: f64) -> CsrMatrix {
        let mut trip = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                if rng.gen::<f64>() < density {
                    trip.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &trip).unwrap()
    }

    #[test]
    fn identity_spmv() {
        let y = CsrMatrix::identity(3).spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        let y = CsrMatrix::identity(3).spmv_transpose(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn hand_products() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(m.spmv(&[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(m.spmv_transpose(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sparse(&mut rng, 7, 5, 0.5);
        assert!(m.spmv(&[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = CsrMatrix::identity(3);
        assert!(matches!(m.spmv(&[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(m.spmv_transpose(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn transpose_product_matches_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_sparse(&mut rng, 20, 30, 0.2);
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = m.spmv_transpose(&x).unwrap();
            let rhs = m.transpose().spmv(&x).unwrap();
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn spmv_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_sparse(&mut rng, 20, 20, 0.3);
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = m.spmv(&x).unwrap();
            let dense = m.to_dense();
            let yd = &dense * nalgebra::DVector::from_column_slice(&x);
            let scale = yd.norm().max(f64::MIN_POSITIVE);
            let err = y.iter().zip(yd.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-13 * scale, "relative error {}", err / scale);
        }
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 1.0), (0, 2, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.row(0).0, &[0, 2]);
    }

    #[test]
    fn structural_invariants_are_enforced() {
        assert!(CsrMatrix::try_new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 3.0)]).unwrap();
        assert!(s.check_symmetric().is_ok());
        let t = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(t.check_symmetric(), Err(Error::NotSymmetric { .. })));
    }

    proptest! {
        #[test]
        fn transpose_is_an_involution(seed in 0u64..1000, r in 1usize..12, c in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_sparse(&mut rng, r, c, 0.3);
            prop_assert_eq!(m.transpose().transpose(), m);
        }
    }
}
