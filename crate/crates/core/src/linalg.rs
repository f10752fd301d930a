//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue cutoff used by [`pseudo_inverse_sym`].
pub const PINV_CUTOFF: f64 = 1e-10;

/// Symmetrizes `m` as `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Applies `f` to the eigenvalues of the symmetric part of `m`.
pub fn sym_spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Moore-Penrose inverse of a symmetric PSD matrix. Eigenvalues below
/// `PINV_CUTOFF` times the largest one are treated as zero.
pub fn pseudo_inverse_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = PINV_CUTOFF * lmax;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 }));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn inv_sqrt_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_spectral_map(m, |l| 1.0 / l.sqrt())
}

pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_spectral_map(m, |l| l.max(0.0).sqrt())
}

/// Extracts the rows `rows` and columns `cols` of `m`.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Nearest symmetric matrix (Frobenius) with all eigenvalues at least `floor`.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    sym_spectral_map(m, |l| l.max(floor))
}

/// Largest absolute entry, 0 for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Row-major flattening.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_of_singular_projector() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pseudo_inverse_sym(&m);
        assert_relative_eq!(p, DMatrix::from_element(2, 2, 0.25), epsilon = 1e-12);
        assert_relative_eq!(&m * &p * &m, m, epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_zero_is_zero() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(pseudo_inverse_sym(&z), z);
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = inv_sqrt_sym(&m);
        assert_relative_eq!(&s * &s * &m, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn clipping_raises_small_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let c = clip_eigenvalues(&m, 0.1);
        let ev = sym_eigenvalues(&c);
        assert_relative_eq!(ev[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-12);
    }
}
