//! Small symmetric-matrix helpers built on nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// m^power for symmetric positive definite m.
pub fn spd_power(m: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid(format!(
            "matrix is not positive definite (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let scaled = eig.eigenvalues.map(|l| l.powf(power));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&scaled) * v.transpose())))
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = spd_power(&m, 0.5).unwrap();
        assert!(frobenius(&(&r * &r - &m)) < 1e-12);
        let inv = spd_power(&m, -1.0).unwrap();
        assert!(frobenius(&(&inv * &m - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_power(&m, 0.5).is_err());
        assert!(min_eigenvalue(&m) < 0.0);
    }
}
