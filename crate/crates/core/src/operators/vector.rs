//! Deterministic vector kernels. Reductions are split into fixed chunks and
//! summed in order, so results do not depend on the execution mode.

use num_complex::Complex64;

use crate::par::{self, Exec};

const CHUNK: usize = 8192;

fn chunks(n: usize) -> usize {
    n.div_ceil(CHUNK)
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let n = a.len();
    if n <= CHUNK {
        return a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    }
    let parts = par::map_range(Exec::current(), chunks(n), |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        a[lo..hi]
            .iter()
            .zip(&b[lo..hi])
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex64>()
    });
    parts.into_iter().sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    let n = a.len();
    if n <= CHUNK {
        return a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    }
    let parts = par::map_range(Exec::current(), chunks(n), |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        a[lo..hi].iter().map(|x| x.norm_sqr()).sum::<f64>()
    });
    parts.into_iter().sum::<f64>().sqrt()
}

/// `y += a x`.
pub fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    if y.len() <= CHUNK {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
        return;
    }
    let snapshot = &*y;
    let updated: Vec<Complex64> = par::map_range(Exec::current(), snapshot.len(), |i| snapshot[i] + a * x[i]);
    y.copy_from_slice(&updated);
}

pub fn scale(a: Complex64, x: &mut [Complex64]) {
    for v in x.iter_mut() {
        *v *= a;
    }
}

/// `Σ_j c_j v_j` over a list of equally long vectors.
pub fn combine(vectors: &[Vec<Complex64>], coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    par::fill(Exec::current(), &mut out, |i| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, c) in vectors.iter().zip(coeffs) {
            acc += c * v[i];
        }
        acc
    });
    out
}

/// Project `w` against every vector in `basis` (assumed orthonormal), twice.
pub fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) {
    for _ in 0..2 {
        let overlaps: Vec<Complex64> = par::map_slice(Exec::current(), basis, |b| dot(b, w));
        if basis.is_empty() {
            return;
        }
        let n = w.len();
        let snapshot = &*w;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        par::fill(Exec::current(), &mut out, |i| {
            let mut acc = snapshot[i];
            for (b, c) in basis.iter().zip(&overlaps) {
                acc -= c * b[i];
            }
            acc
        });
        w.copy_from_slice(&out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_dot_matches_direct() {
        let n = 3 * CHUNK + 17;
        let a: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.5)).collect();
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, (i as f64).cos())).collect();
        let direct: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        assert!((dot(&a, &b) - direct).norm() < 1e-9);
        par::force_sequential(true);
        let s = dot(&a, &b);
        par::force_sequential(false);
        assert_eq!(s, dot(&a, &b));
    }

    #[test]
    fn orthogonalize_removes_overlap() {
        let e0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let mut w = vec![Complex64::new(2.0, 1.0), Complex64::new(3.0, 0.0)];
        orthogonalize(std::slice::from_ref(&e0), &mut w);
        assert!(dot(&e0, &w).norm() < 1e-15);
        assert_eq!(w[1], Complex64::new(3.0, 0.0));
    }
}
