//! Crate-internal symmetric eigendecomposition helpers shared by the
//! Fréchet distance and the Gaussian copula.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

/// Eigenvalues and eigenvectors (columns) of a symmetric matrix.
pub(crate) fn sym_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    // Column-major fill from the transpose keeps the mapping exact; the
    // input is symmetric so either order works.
    let m = DMatrix::from_iterator(n, n, a.t().iter().copied());
    let eig = SymmetricEigen::new(m);
    let values = eig.eigenvalues.iter().copied().collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
    (values, vectors)
}

/// `V · diag(vals) · Vᵀ` for eigenvector columns `V`.
pub(crate) fn rebuild_sym(vals: &[f64], vecs: &Array2<f64>) -> Array2<f64> {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|x| x * v);
    }
    scaled.dot(&vecs.t())
}

/// `V · diag(√max(vals, 0))`: a factor `L` with `L·Lᵀ` equal to the
/// PSD-clipped input.
pub(crate) fn psd_factor(vals: &[f64], vecs: &Array2<f64>) -> Array2<f64> {
    let mut factor = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        factor.column_mut(j).mapv_inplace(|x| x * s);
    }
    factor
}
