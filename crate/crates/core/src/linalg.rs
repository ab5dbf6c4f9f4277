//! Small complex linear-algebra helpers shared by the schemes.

use crate::error::{Error, Result};
use crate::Cx;
use nalgebra::{DMatrix, DVector};

/// Condition-number threshold above which a channel stack is treated as the
/// measure-zero singular event and the trial is resampled.
pub const COND_THRESHOLD: f64 = 1e8;

/// 2-norm condition number via singular values. Returns infinity for a
/// numerically rank-deficient matrix.
pub fn condition_number(m: &DMatrix<Cx>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve A X = B for square A, rejecting ill-conditioned systems.
pub fn solve_square(a: &DMatrix<Cx>, b: &DMatrix<Cx>) -> Result<DMatrix<Cx>> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > COND_THRESHOLD {
        return Err(Error::IllConditioned {
            cond,
            threshold: COND_THRESHOLD,
        });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::IllConditioned {
            cond,
            threshold: COND_THRESHOLD,
        })
}

/// Smallest and largest singular values.
pub fn singular_extremes(m: &DMatrix<Cx>) -> (f64, f64) {
    let svd = m.clone().svd(false, false);
    (svd.singular_values.min(), svd.singular_values.max())
}

/// Project `v` onto the null space of `a` (a has fewer rows than columns):
/// v - A^H (A A^H)^{-1} A v.
pub fn null_space_projection(a: &DMatrix<Cx>, v: &DVector<Cx>) -> Result<DVector<Cx>> {
    let gram = a * a.adjoint();
    let av = a * v;
    let coeffs = solve_square(&gram, &DMatrix::from_column_slice(av.len(), 1, av.as_slice()))?;
    let correction = a.adjoint() * coeffs.column(0);
    Ok(v - correction)
}

/// Cholesky of a Hermitian matrix, insisting on positive definiteness.
///
/// nalgebra's complex Cholesky happily takes square roots of negative
/// pivots, so the factor's diagonal is checked for positive real entries.
fn cholesky_pd(m: &DMatrix<Cx>) -> Result<nalgebra::Cholesky<Cx, nalgebra::Dyn>> {
    // Symmetrize to scrub rounding asymmetry before factorizing.
    let sym = (m + m.adjoint()) * Cx::new(0.5, 0.0);
    let chol = sym.cholesky().ok_or(Error::NotPositiveDefinite)?;
    for d in chol.l().diagonal().iter() {
        if !(d.re > 0.0) || d.im.abs() > 1e-9 * d.re {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// log2 det(M) of a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hermitian(m: &DMatrix<Cx>) -> Result<f64> {
    let chol = cholesky_pd(m)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.re.log2()).sum::<f64>())
}

/// Solve the Hermitian positive-definite system R X = B.
pub fn solve_hermitian(r: &DMatrix<Cx>, b: &DMatrix<Cx>) -> Result<DMatrix<Cx>> {
    Ok(cholesky_pd(r)?.solve(b))
}

/// Frobenius norm.
pub fn fro_norm(m: &DMatrix<Cx>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
