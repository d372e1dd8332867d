use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SdpError;

fn symmetrized(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrized(x))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Eigendecomposition with negative eigenvalues clipped to zero.
pub fn sym_eigen_clipped(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrized(x));
    (eig.eigenvalues.map(|l| l.max(0.0)), eig.eigenvectors)
}

/// Square-root factor `R` with `Rᵀ R = x`, built as `R = Λ^{1/2} Qᵀ` from the
/// symmetric eigendecomposition with negative eigenvalues clipped.
pub fn sqrt_factor(x: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, SdpError> {
    let eig = SymmetricEigen::new(symmetrized(x));
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < -tol {
        return Err(SdpError::NotPsd { min_eig: lo, tol });
    }
    let mut r = eig.eigenvectors.transpose();
    for (k, mut row) in r.row_iter_mut().enumerate() {
        row *= eig.eigenvalues[k].max(0.0).sqrt();
    }
    Ok(r)
}
