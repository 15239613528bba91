//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Largest entry of `|M - M†|`.
pub fn hermiticity_error(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint())
        .iter()
        .fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues ascending with matching eigenvector columns of a Hermitian matrix.
pub fn eigh(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    if !m.is_square() {
        return Err(invalid("eigh needs a square matrix"));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Real symmetric variant of [`eigh`].
pub fn eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `exp(-iθH)` for Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<Complex64>, theta: f64) -> Result<DMatrix<Complex64>> {
    let (values, vectors) = eigh(h)?;
    let phases = DVector::from_iterator(
        values.len(),
        values
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -theta * e)),
    );
    let scaled = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| vectors[(r, c)] * phases[c]);
    Ok(scaled * vectors.adjoint())
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `sqrt(b2)`.
pub fn tridiagonal_eigh(a: &[f64], b2: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if a.is_empty() || b2.len() + 1 != a.len() {
        return Err(invalid(format!(
            "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
            a.len(),
            b2.len()
        )));
    }
    if let Some(b) = b2.iter().find(|&&b| b < 0.0) {
        return Err(invalid(format!("negative b^2 = {b} in tridiagonal matrix")));
    }
    let n = a.len();
    let t = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            a[r]
        } else if r + 1 == c {
            b2[r].sqrt()
        } else if c + 1 == r {
            b2[c].sqrt()
        } else {
            0.0
        }
    });
    Ok(eigh_real(&t))
}

/// Solve the symmetric positive-semidefinite system `(A + εI) x = c`
/// followed by `refinements` rounds of iterative refinement against `A`.
///
/// Returns the solution and the final residual `‖A x - c‖`.
pub fn solve_regularized(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    eps: f64,
    refinements: usize,
) -> (DVector<f64>, f64) {
    let (values, vectors) = eigh_real(a);
    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        let proj = vectors.transpose() * rhs;
        let scaled = DVector::from_iterator(
            proj.len(),
            proj.iter()
                .zip(&values)
                .map(|(p, &l)| p / (l.max(0.0) + eps)),
        );
        &vectors * scaled
    };
    let mut x = solve(c);
    for _ in 0..refinements {
        let r = c - a * &x;
        x += solve(&r);
    }
    let residual = (a * &x - c).norm();
    (x, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0), c(1.0)]));
        let (e, v) = eigh(&m).unwrap();
        assert_eq!(e, vec![1.0, 3.0]);
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let (e, _) = eigh(&m).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expm_of_z() {
        let z = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let u = expm_hermitian(&z, 0.4).unwrap();
        assert!((u[(0, 0)] - Complex64::from_polar(1.0, -0.4)).norm() < 1e-14);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, 0.4)).norm() < 1e-14);
    }

    #[test]
    fn tridiagonal_two_by_two() {
        let (e, v) = tridiagonal_eigh(&[0.0, 0.0], &[1.0]).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        assert!((v[(0, 0)].powi(2) - 0.5).abs() < 1e-15);
        assert!(tridiagonal_eigh(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn regularized_solve_on_singular_consistent_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let rhs = DVector::from_vec(vec![2.0, 2.0]);
        let (x, r) = solve_regularized(&a, &rhs, 1e-8, 3);
        assert!(r < 1e-8);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }
}
