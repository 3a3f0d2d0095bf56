//! Small dense helpers. Every matrix in this crate is at most 9x9.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue cutoff for the pseudo-inverse fallback.
pub(crate) const PINV_RCOND: f64 = 1e-12;

/// Lower Cholesky factor of a symmetric matrix.
///
/// Returns `None` when some pivot (the conditional variance of a variable
/// given all earlier ones) drops below `rel_tol` times `reference[i]`.
/// Passing the matrix's own diagonal as the reference makes the test scale
/// invariant.
pub(crate) fn cholesky(m: &DMatrix<f64>, reference: &[f64], rel_tol: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert_eq!(reference.len(), n);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !pivot.is_finite() || pivot <= rel_tol * reference[j].abs() || pivot <= 0.0 {
            return None;
        }
        let root = pivot.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Some(l)
}

pub(crate) fn diagonal(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)]).collect()
}

/// Solves `L X = B` for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// `log det` from a Cholesky factor.
pub(crate) fn log_det_from_factor(l: &DMatrix<f64>) -> f64 {
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = PINV_RCOND * largest;
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| if v > cutoff { 1.0 / v } else { 0.0 }),
    );
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&inv) * q.transpose()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// A square root `R` with `R R^T = m` for a PSD matrix: Cholesky when it
/// succeeds, otherwise the clamped eigen square root.
pub(crate) fn psd_square_root(m: &DMatrix<f64>) -> DMatrix<f64> {
    let diag = diagonal(m);
    if let Some(l) = cholesky(m, &diag, 1e-14) {
        return l;
    }
    let eig = SymmetricEigen::new(m.clone());
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 2.0, 0.4, 0.6, 0.4, 1.0]);
        let l = cholesky(&m, &diagonal(&m), 1e-12).unwrap();
        let back = &l * l.transpose();
        assert!((back - &m).abs().max() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky(&m, &diagonal(&m), 1e-12).is_none());
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pseudo_inverse(&m);
        let back = &m * &p * &m;
        assert!((back - &m).abs().max() < 1e-14);
    }

    #[test]
    fn square_root_of_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let r = psd_square_root(&m);
        assert!((&r * r.transpose() - &m).abs().max() < 1e-13);
    }
}
