//! Conversions between the ndarray containers used in public types and the
//! faer matrices used for factorizations.

use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, MatRef};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub(crate) fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn to_faer_c(a: &Array2<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn from_faer_c(m: MatRef<'_, Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD of a real matrix: `(u, sigma, v)` with `a = u * diag(sigma) * v^T`.
pub(crate) fn thin_svd(a: &Array2<f64>) -> crate::Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| crate::Error::Shape(format!("svd failed to converge: {e:?}")))?;
    let k = svd.S().dim();
    let u = Array2::from_shape_fn((a.nrows(), k), |(i, j)| svd.U()[(i, j)]);
    let s = Array1::from_shape_fn(k, |i| svd.S()[i]);
    let v = Array2::from_shape_fn((a.ncols(), k), |(i, j)| svd.V()[(i, j)]);
    Ok((u, s, v))
}

/// Thin SVD of a complex matrix: `a = u * diag(sigma) * v^H`.
pub(crate) fn thin_svd_c(
    a: &Array2<Complex64>,
) -> crate::Result<(Array2<Complex64>, Array1<f64>, Array2<Complex64>)> {
    let svd = to_faer_c(a)
        .thin_svd()
        .map_err(|e| crate::Error::Shape(format!("svd failed to converge: {e:?}")))?;
    let k = svd.S().dim();
    let u = Array2::from_shape_fn((a.nrows(), k), |(i, j)| svd.U()[(i, j)]);
    let s = Array1::from_shape_fn(k, |i| svd.S()[i].re);
    let v = Array2::from_shape_fn((a.ncols(), k), |(i, j)| svd.V()[(i, j)]);
    Ok((u, s, v))
}

/// Eigendecomposition of a real square matrix: `(values, vectors)` with
/// complex pairs for real inputs.
pub(crate) fn eig_real(a: &Array2<f64>) -> crate::Result<(Vec<Complex64>, Array2<Complex64>)> {
    let eig = to_faer(a)
        .eigen()
        .map_err(|e| crate::Error::Shape(format!("eigendecomposition failed: {e:?}")))?;
    let n = a.nrows();
    let values = (0..n).map(|i| eig.S()[i]).collect();
    let vectors = from_faer_c(eig.U());
    Ok((values, vectors))
}

/// Least-squares solution of `a x = b` for complex matrices via QR; `a` must
/// have at least as many rows as columns.
pub(crate) fn lstsq_c(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let qr = to_faer_c(a).qr();
    let sol = qr.solve_lstsq(to_faer_c(b));
    from_faer_c(sol.as_ref())
}
