//! Small dense linear-algebra helpers shared by the filter and the clutter model.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue cutoff used by the pseudo-inverse fallback.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// How a symmetric innovation covariance was inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionPath {
    Cholesky,
    PseudoInverse,
    /// Zero-dimensional system, nothing to invert.
    Empty,
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

/// Smallest eigenvalue of a symmetric matrix; `+inf` for an empty one.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Column of ones.
pub fn ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix through its
/// eigendecomposition. Eigenvalues at or below
/// `PINV_RELATIVE_CUTOFF * max|λ|` are treated as zero.
pub fn symmetric_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let largest = eig.eigenvalues.amax();
    let cutoff = PINV_RELATIVE_CUTOFF * largest;
    let inv_vals = eig
        .eigenvalues
        .map(|l| if l > cutoff && l > 0.0 { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

/// Computes `cross · cov⁻¹` for a symmetric PSD `cov`.
///
/// Cholesky is tried first; when the factorization fails the eigenvalue
/// pseudo-inverse is used instead. The path taken is reported so callers
/// can audit how often the fallback fires.
pub fn right_divide_spd(cross: &DMatrix<f64>, cov: &DMatrix<f64>) -> (DMatrix<f64>, InversionPath) {
    if cov.nrows() == 0 {
        return (DMatrix::zeros(cross.nrows(), 0), InversionPath::Empty);
    }
    if let Some(chol) = cov.clone().cholesky() {
        // X·cov = cross  <=>  cov·Xᵀ = crossᵀ
        let xt = chol.solve(&cross.transpose());
        (xt.transpose(), InversionPath::Cholesky)
    } else {
        (cross * symmetric_pinv(cov), InversionPath::PseudoInverse)
    }
}

/// Symmetric square root `R` with `R·Rᵀ = m` for a PSD matrix; tiny negative
/// eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_of_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0]);
        let m = outer(&v, &v);
        let p = symmetric_pinv(&m);
        // Penrose identities
        assert_relative_eq!(&m * &p * &m, m.clone(), epsilon = 1e-12);
        assert_relative_eq!(&p * &m * &p, p.clone(), epsilon = 1e-12);
        assert_relative_eq!(p[(0, 0)], 1.0 / 25.0, epsilon = 1e-14);
    }

    #[test]
    fn right_divide_prefers_cholesky() {
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let cross = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let (k, path) = right_divide_spd(&cross, &cov);
        assert_eq!(path, InversionPath::Cholesky);
        assert_relative_eq!(&k * &cov, cross, epsilon = 1e-12);
    }

    #[test]
    fn right_divide_falls_back_on_singular() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let cross = DMatrix::from_row_slice(1, 2, &[2.0, 2.0]);
        let (k, path) = right_divide_spd(&cross, &cov);
        assert_eq!(path, InversionPath::PseudoInverse);
        assert_relative_eq!(
            k,
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sqrt_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[30.0, 2.0, 2.0, 5.0]);
        let r = psd_sqrt(&m);
        assert_relative_eq!(&r * r.transpose(), m, epsilon = 1e-10);
    }

    #[test]
    fn empty_matrices() {
        assert_eq!(min_eigenvalue(&DMatrix::zeros(0, 0)), f64::INFINITY);
        let (k, path) = right_divide_spd(&DMatrix::zeros(2, 0), &DMatrix::zeros(0, 0));
        assert_eq!(path, InversionPath::Empty);
        assert_eq!(k.shape(), (2, 0));
    }
}
