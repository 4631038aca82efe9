use std::ops::{Index, IndexMut};

use nalgebra::linalg::{Cholesky, Schur, SymmetricEigen, LU};
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::DiagonalMatrix;
use crate::error::{Error, Result};

/// Largest dimension accepted by the dense eigensolvers.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Small dense matrix for verification-scale work.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix(DMatrix::zeros(n_rows, n_cols))
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: &[f64]) -> Self {
        DenseMatrix(DMatrix::from_row_slice(n_rows, n_cols, data))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        DenseMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_nalgebra(m: DMatrix<f64>) -> Self {
        DenseMatrix(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n_rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 * &other.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.0 * DVector::from_column_slice(x);
        y.as_slice().to_vec()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix(self.0.transpose())
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, alpha: f64) -> DenseMatrix {
        DenseMatrix(&self.0 * alpha)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.0 - self.0.transpose()).amax()
    }

    /// Places `block` with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &DenseMatrix) {
        self.0
            .view_mut((row, col), (block.n_rows(), block.n_cols()))
            .copy_from(&block.0);
    }

    pub fn block(&self, row: usize, col: usize, n_rows: usize, n_cols: usize) -> DenseMatrix {
        DenseMatrix(self.0.view((row, col), (n_rows, n_cols)).into_owned())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j).iter().copied().collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut f64 {
        &mut self.0[idx]
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: LU<f64, Dyn, Dyn>,
    n: usize,
}

impl DenseLu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        assert_eq!(a.n_rows(), a.n_cols());
        let lu = LU::new(a.0.clone());
        if !lu.is_invertible() {
            return Err(Error::Singular);
        }
        Ok(DenseLu { lu, n: a.n_rows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut x);
        x.as_slice().to_vec()
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let mut v = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut v);
        x.copy_from_slice(v.as_slice());
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut x = b.0.clone();
        self.lu.solve_mut(&mut x);
        DenseMatrix(x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.n))
    }
}

/// Parlett-Reinsch balancing by powers of two; a similarity transform that
/// leaves eigenvalues unchanged and evens out row/column norms.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// All eigenvalues of a general real square matrix: balancing, then the
/// real Schur form (Hessenberg reduction plus shifted QR).
pub fn dense_eigenvalues(a: &DenseMatrix, cap: usize) -> Result<Vec<Complex64>> {
    let n = a.n_rows();
    if n != a.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.n_cols(),
        });
    }
    if n > cap {
        return Err(Error::DenseCapExceeded { dim: n, cap });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.max_abs() == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let mut m = a.0.clone();
    balance(&mut m);
    // Deflation at machine epsilon can stall on large clusters of equal
    // eigenvalues; loosen it step by step before giving up.
    for eps in [f64::EPSILON, 1e-14, 1e-12] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, 100 * n.max(10)) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::EigenNoConvergence)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.0.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

fn check_symmetric(s: &DenseMatrix, tol: f64) -> Result<()> {
    let asym = s.max_asymmetry();
    if asym > tol * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Extreme values of the Rayleigh quotient `(Su,u)/(Tu,u)`, i.e. the
/// extreme eigenvalues of `T^{-1/2} S T^{-1/2}`.
pub fn sym_generalized_eig_extremes(s: &DenseMatrix, t: &DiagonalMatrix) -> Result<(f64, f64)> {
    let n = s.n_rows();
    if t.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.len(),
        });
    }
    check_symmetric(s, 1e-12)?;
    if let Some((index, &value)) = t.diag().iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    let isqrt: Vec<f64> = t.diag().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut c = s.0.clone();
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] *= isqrt[i] * isqrt[j];
        }
    }
    // restore exact symmetry before the symmetric solver
    let c = (&c + c.transpose()) * 0.5;
    let ev = sym_eigenvalues(&DenseMatrix(c));
    Ok((ev[0], ev[n - 1]))
}

/// Eigenvalues of the symmetric-definite pencil `(S1, S2)` with `S2` SPD,
/// ascending.
pub fn generalized_sym_eigenvalues(s1: &DenseMatrix, s2: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(s1, 1e-10)?;
    check_symmetric(s2, 1e-10)?;
    let s2sym = (&s2.0 + s2.0.transpose()) * 0.5;
    let chol = Cholesky::new(s2sym).ok_or(Error::Singular)?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::Singular)?;
    let c = &linv * &s1.0 * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(sym_eigenvalues(&DenseMatrix(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let ev = sorted(dense_eigenvalues(&a, DEFAULT_DENSE_CAP).unwrap());
        for (e, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((e - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_eigenvalues() {
        let a = DenseMatrix::from_row_major(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = sorted(dense_eigenvalues(&a, DEFAULT_DENSE_CAP).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let a = DenseMatrix::identity(5);
        assert!(matches!(
            dense_eigenvalues(&a, 4),
            Err(Error::DenseCapExceeded { dim: 5, cap: 4 })
        ));
    }

    #[test]
    fn generalized_extremes() {
        let i2 = DiagonalMatrix::new(vec![1.0, 1.0]);
        let (lo, hi) = sym_generalized_eig_extremes(&DenseMatrix::identity(2), &i2).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        let (lo, hi) =
            sym_generalized_eig_extremes(&DenseMatrix::from_diagonal(&[1.0, 4.0]), &i2).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 4.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_extremes_errors() {
        let asym = DenseMatrix::from_row_major(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let i2 = DiagonalMatrix::new(vec![1.0, 1.0]);
        assert!(matches!(
            sym_generalized_eig_extremes(&asym, &i2),
            Err(Error::NotSymmetric(_))
        ));
        let bad = DiagonalMatrix::new(vec![1.0, -1.0]);
        assert!(matches!(
            sym_generalized_eig_extremes(&DenseMatrix::identity(2), &bad),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn lu_solves() {
        let a = DenseMatrix::from_row_major(2, 2, &[2.0, 1.0, 1.0, -3.0]);
        let lu = DenseLu::new(&a).unwrap();
        let x = lu.solve(&[3.0, -2.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(DenseLu::new(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn balancing_preserves_spectrum_of_badly_scaled_matrix() {
        let a = DenseMatrix::from_row_major(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e4, 0.0, 1e-4, 3.0]);
        let mut b = a.0.clone();
        balance(&mut b);
        assert!((b.trace() - a.trace()).abs() < 1e-12);
        let ev = dense_eigenvalues(&a, 10).unwrap();
        let sum: Complex64 = ev.iter().sum();
        assert!((sum.re - 6.0).abs() < 1e-10);
    }
}
