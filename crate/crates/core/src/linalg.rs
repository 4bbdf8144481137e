//! Small dense linear-algebra helpers with deterministic conventions.
//!
//! Symmetric eigendecompositions return eigenvalues in ascending order and
//! eigenvectors whose largest-magnitude component is positive (first such
//! component on ties), so results do not depend on backend sign choices.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Eigenvalues (ascending) and matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Same decomposition with eigenpairs in descending order.
    pub fn descending(&self) -> SymEigen {
        let n = self.values.len();
        let values = DVector::from_fn(n, |i, _| self.values[n - 1 - i]);
        let vectors = DMatrix::from_fn(n, n, |r, c| self.vectors[(r, n - 1 - c)]);
        SymEigen { values, vectors }
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

/// True when every off-diagonal entry is within `tol` of zero.
pub fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    off_diagonal_mass(m) <= tol
}

pub fn off_diagonal_mass(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c {
                worst = worst.max(m[(r, c)].abs());
            }
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix.
///
/// Diagonal inputs are decomposed exactly: the eigenvectors are a permutation
/// of the identity (stable order on ties), so no rounding leaks into the
/// off-diagonal structure of downstream products.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if is_diagonal(m, 0.0) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)]));
        let values = DVector::from_fn(n, |i, _| m[(order[i], order[i])]);
        let vectors = DMatrix::from_fn(n, n, |r, c| if r == order[c] { 1.0 } else { 0.0 });
        return SymEigen { values, vectors };
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            col = -col;
        }
        vectors.set_column(c, &col);
    }
    SymEigen { values, vectors }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigen(m).values[0]
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |v| v.max(0.0).sqrt())
}

/// Moore–Penrose inverse of the symmetric square root. Eigenvalues at or below
/// `cutoff` are treated as zero.
pub fn sym_inv_sqrt(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    spectral_map(m, |v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 })
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = sym_eigen(m);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let col = e.vectors.column(i);
        out += col * col.transpose() * f(e.values[i]);
    }
    if is_diagonal(m, 0.0) {
        // keep exact zeros off the diagonal
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    out[(r, c)] = 0.0;
                }
            }
        }
        out
    } else {
        symmetrize(&out)
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(LinalgError::Singular)
}

/// Frobenius norm of `(I + UWV)^{-1} - (I - U (W^{-1} + VU)^{-1} V)`.
///
/// `U` is `n×m`, `W` is `m×m`, `V` is `m×n`.
pub fn inversion_lemma_residual(
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<f64, LinalgError> {
    let n = u.nrows();
    let m = u.ncols();
    if w.shape() != (m, m) || v.shape() != (m, n) {
        return Err(LinalgError::Shape(format!(
            "U {:?}, W {:?}, V {:?}",
            u.shape(),
            w.shape(),
            v.shape()
        )));
    }
    let eye_n = DMatrix::<f64>::identity(n, n);
    let lhs = (&eye_n + u * w * v)
        .try_inverse()
        .ok_or(LinalgError::Singular)?;
    let w_inv = w.clone().try_inverse().ok_or(LinalgError::Singular)?;
    let inner = (w_inv + v * u).try_inverse().ok_or(LinalgError::Singular)?;
    let rhs = eye_n - u * inner * v;
    Ok((lhs - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_convention_is_ascending_and_sign_fixed() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let e = sym_eigen(&m);
        assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        for c in 0..3 {
            let col = e.vectors.column(c);
            let pivot = col.iamax();
            assert!(col[pivot] > 0.0);
            let resid = &m * col - col * e.values[c];
            assert!(resid.norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_eigen_is_a_permutation() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eigen(&m);
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(2, 1)], 1.0);
        assert_eq!(e.vectors[(0, 2)], 1.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = sym_sqrt(&m);
        assert!((&s * &s - &m).amax() < 1e-12);
        let si = sym_inv_sqrt(&m, 0.0);
        assert!((&si * &m * &si - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_root_uses_pseudo_inverse() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        let si = sym_inv_sqrt(&m, 1e-14);
        assert_eq!(si[(0, 0)], 0.5);
        assert_eq!(si[(1, 1)], 0.0);
    }

    #[test]
    fn lemma_trivial_instance() {
        let u = DMatrix::zeros(3, 2);
        let w = DMatrix::identity(2, 2);
        let v = DMatrix::zeros(2, 3);
        assert_eq!(inversion_lemma_residual(&u, &w, &v).unwrap(), 0.0);
    }

    #[test]
    fn lemma_rejects_bad_shapes() {
        let u = DMatrix::zeros(3, 2);
        let w = DMatrix::identity(3, 3);
        let v = DMatrix::zeros(2, 3);
        assert!(matches!(
            inversion_lemma_residual(&u, &w, &v),
            Err(LinalgError::Shape(_))
        ));
    }
}
