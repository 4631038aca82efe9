//! Linear-algebra substrate: compressed-row sparse matrices, lumped
//! diagonals, small dense matrices for verification, and a handful of
//! vector kernels.

mod csr;
mod dense;
mod lanczos;
mod market;

pub use csr::{CsrMatrix, CsrPattern, DiagonalMatrix, TripletBuilder};
pub use dense::{
    dense_eigenvalues, generalized_sym_eigenvalues, sym_eigenvalues,
    sym_generalized_eig_extremes, DenseLu, DenseMatrix, DEFAULT_DENSE_CAP,
};
pub use lanczos::lanczos_extremes;
pub use market::{read_matrix_market, write_matrix_market};

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
