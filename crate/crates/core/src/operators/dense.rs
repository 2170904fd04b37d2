//! Small dense helpers on top of faer.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| if i == j { c(1.0) } else { c(0.0) })
}

pub fn zeros(d: usize) -> CMat {
    Mat::zeros(d, d)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `(A + A^†) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    let d = a.nrows();
    Mat::from_fn(d, d, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// `U^† A U`.
pub fn to_basis(u: &CMat, a: &CMat) -> CMat {
    u.adjoint() * a * u
}

/// `U A U^†`.
pub fn from_basis(u: &CMat, a: &CMat) -> CMat {
    u * a * u.adjoint()
}

/// Full Hermitian eigendecomposition, ascending.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numerical(format!("eigendecomposition failed: {e:?}"), f64::NAN))?;
    let s = evd.S();
    let vals = s.column_vector().iter().map(|x| x.re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::numerical(format!("eigenvalue solve failed: {e:?}"), f64::NAN))
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    if a.nrows() == a.ncols() && crate::operators::matrix::hermiticity_defect(a) <= 1e-14 * (1.0 + max_abs(a)) {
        let ev = eigvalsh(&hermitian_part(a))?;
        return Ok(ev.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let sv = a
        .singular_values()
        .map_err(|e| Error::numerical(format!("singular value solve failed: {e:?}"), f64::NAN))?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// Unitary polar factor `W V^†` of `A = W Σ V^†`.
pub fn polar(a: &CMat) -> Result<CMat> {
    let svd = a
        .svd()
        .map_err(|e| Error::numerical(format!("singular value decomposition failed: {e:?}"), f64::NAN))?;
    Ok(svd.U() * svd.V().adjoint())
}

/// `max |(U^† U - I)_ij|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.ncols())))
}

/// Orthonormal basis (columns) of the range of a positive semidefinite matrix.
pub fn range_basis(a: &CMat, tol: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(a)?;
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol).collect();
    Ok(Mat::from_fn(a.nrows(), cols.len(), |i, j| vecs[(i, cols[j])]))
}

/// Orthogonal projector onto the span of the columns of an isometry.
pub fn projector_of(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_diagonal_readback() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { c(3.0 - i as f64) } else { c(0.0) });
        let (vals, _) = eigh(&a).unwrap();
        assert_eq!(vals, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(spectral_norm(&a).unwrap(), 3.0);
    }

    #[test]
    fn nonhermitian_norm() {
        let mut a = zeros(2);
        a[(0, 1)] = c(2.0);
        assert!((spectral_norm(&a).unwrap() - 2.0).abs() < 1e-14);
    }
}
