//! Hermitian matrix helpers shared by the statistics and detector modules.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Replaces `m` with its Hermitian part `(m + m^H) / 2`.
///
/// Used to kill round-off skew on matrices that are Hermitian analytically.
pub fn hermitian_symmetrize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
}

/// Largest absolute entry of `m - m^H`.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut dev = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Cholesky factorization of a Hermitian positive-definite matrix, with the
/// matrix name carried into the error when factorization fails.
///
/// nalgebra's complex Cholesky happily takes square roots of negative pivots
/// (`sqrt(-1) = i`), so an explicit real-positive pivot check is required to
/// reject indefinite inputs.
pub fn cholesky_named(
    m: &DMatrix<Complex64>,
    name: &'static str,
) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(m.clone()).ok_or(Error::SingularMatrix { name })?;
    for d in chol.l_dirty().diagonal().iter() {
        if !(d.re > 0.0) || d.im.abs() > 1e-8 * d.re {
            return Err(Error::SingularMatrix { name });
        }
    }
    Ok(chol)
}

/// Inverse of a Hermitian positive-definite matrix via its Cholesky factor.
pub fn hermitian_inverse(m: &DMatrix<Complex64>, name: &'static str) -> Result<DMatrix<Complex64>> {
    let mut inv = cholesky_named(m, name)?.inverse();
    hermitian_symmetrize(&mut inv);
    Ok(inv)
}

/// `ln det` of the factorized matrix, from the Cholesky diagonal.
pub fn ln_det(chol: &Cholesky<Complex64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>()
}

/// Projects a Hermitian matrix onto the PSD cone by clamping negative
/// eigenvalues to zero.
pub fn psd_project(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            // out += lambda * v v^H
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[i] * v[j].conj() * lambda;
                }
            }
        }
    }
    hermitian_symmetrize(&mut out);
    out
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Numerical rank: singular values above `rel_tol * sigma_max` are counted.
pub fn numerical_rank_complex(m: &DMatrix<Complex64>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Numerical rank of a real matrix, same threshold convention.
pub fn numerical_rank_real(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn symmetrize_makes_exactly_hermitian() {
        let mut m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.3), c(2.0, 1.0), c(2.1, -1.2), c(4.0, -0.1)]);
        hermitian_symmetrize(&mut m);
        assert_eq!(hermitian_deviation(&m), 0.0);
    }

    #[test]
    fn psd_projection_clamps_negative_modes() {
        // diag(2, -3) projects to diag(2, 0)
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(-3.0, 0.0)]));
        let p = psd_project(&m);
        assert!((p[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!(p[(1, 1)].norm() < 1e-12);
        assert!(min_eigenvalue(&p) >= -1e-12);
    }

    #[test]
    fn rank_counts_relative_to_largest_singular_value() {
        let mut m = DMatrix::<Complex64>::zeros(3, 3);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1e-12, 0.0);
        assert_eq!(numerical_rank_complex(&m, 1e-8), 1);
        assert_eq!(numerical_rank_complex(&m, 1e-14), 2);
    }

    #[test]
    fn ln_det_matches_scalar_case() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(0.5, 0.0)]));
        let chol = cholesky_named(&m, "m").unwrap();
        assert!((ln_det(&chol) - (2.0_f64.ln() + 0.5_f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reports_offender_by_name() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        match cholesky_named(&m, "sigma_ba") {
            Err(Error::SingularMatrix { name }) => assert_eq!(name, "sigma_ba"),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }
}
