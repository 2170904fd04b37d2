//! Matrix realizations of Pauli sums: dense below a dimension threshold,
//! row-compressed above it, plus a matrix-free path for Krylov solvers.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;

use super::pauli::{PauliString, PauliSum};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Qubit caps for the two storage formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Caps {
    pub dense_qubits: usize,
    pub sparse_qubits: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            dense_qubits: 12,
            sparse_qubits: 20,
        }
    }
}

/// Something that can multiply a vector; all solvers go through this.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

/// Row-compressed complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        par::fill(Exec::current(), y, |r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            acc
        });
    }
}

impl LinearOperator for Mat<Complex64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.nrows();
        par::fill(Exec::current(), y, |r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n {
                acc += self[(r, c)] * x[c];
            }
            acc
        });
    }
}

/// Pauli sum grouped by X mask for gather-form matrix-free products:
/// `(Mψ)[r] = Σ_x Σ_z c (-1)^{|(r^x)&z|} ψ[r^x]`.
#[derive(Debug, Clone)]
pub struct PauliOperator {
    n: usize,
    groups: Vec<(u64, Vec<(u64, Complex64)>)>,
    exec: Exec,
}

impl PauliOperator {
    pub fn new(sum: &PauliSum, caps: &Caps) -> Result<Self> {
        let n = sum.n_qubits();
        if n > caps.sparse_qubits {
            return Err(Error::Resource {
                what: "matrix-free Pauli operator qubits".into(),
                needed: n,
                cap: caps.sparse_qubits,
            });
        }
        let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for (c, p) in sum.combined() {
            groups
                .entry(p.x_mask()[0])
                .or_default()
                .push((p.z_mask()[0], c));
        }
        Ok(PauliOperator {
            n,
            groups: groups.into_iter().collect(),
            exec: Exec::current(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, r: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (xm, zs) in &self.groups {
            let c = r as u64 ^ xm;
            let v = x[c as usize];
            let mut coef = Complex64::new(0.0, 0.0);
            for &(zm, a) in zs {
                if (c & zm).count_ones().is_multiple_of(2) {
                    coef += a;
                } else {
                    coef -= a;
                }
            }
            acc += coef * v;
        }
        acc
    }
}

impl LinearOperator for PauliOperator {
    fn dim(&self) -> usize {
        1usize << self.n
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        par::fill(self.exec, y, |r| self.row(r, x));
    }
}

/// Storage behind an [`OperatorMatrix`].
#[derive(Debug, Clone)]
pub enum Storage {
    Dense(Mat<Complex64>),
    Sparse(CsrMatrix),
}

/// A realized operator on `n` qubits.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    n_qubits: usize,
    storage: Storage,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn from_dense(m: Mat<Complex64>) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d || !d.is_power_of_two() {
            return Err(Error::invalid(format!(
                "operator matrix must be square with power-of-two size, got {}x{}",
                d,
                m.ncols()
            )));
        }
        let hermitian = hermiticity_defect(&m) <= 1e-12;
        Ok(OperatorMatrix {
            n_qubits: d.trailing_zeros() as usize,
            storage: Storage::Dense(m),
            hermitian,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dimension(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn dense(&self) -> Option<&Mat<Complex64>> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            Storage::Sparse(_) => None,
        }
    }

    pub fn into_dense(self) -> Mat<Complex64> {
        match self.storage {
            Storage::Dense(m) => m,
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => s.to_dense(),
        }
    }
}

impl LinearOperator for OperatorMatrix {
    fn dim(&self) -> usize {
        self.dimension()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        match &self.storage {
            Storage::Dense(m) => m.apply(x, y),
            Storage::Sparse(s) => s.apply(x, y),
        }
    }
}

/// `max |M - M^†|`.
pub fn hermiticity_defect(m: &Mat<Complex64>) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Dense realization; fails above `caps.dense_qubits`.
pub fn realize_dense(op: &PauliSum, caps: &Caps) -> Result<Mat<Complex64>> {
    let n = op.n_qubits();
    if n > caps.dense_qubits {
        return Err(Error::Resource {
            what: "dense realization qubits".into(),
            needed: n,
            cap: caps.dense_qubits,
        });
    }
    let d = 1usize << n;
    let mut m = Mat::<Complex64>::zeros(d, d);
    for (c, p) in op.combined() {
        let bare = p;
        for col in 0..d {
            let (row, ph) = bare.apply_basis(col as u64);
            m[(row as usize, col)] += c * ph;
        }
    }
    Ok(m)
}

/// Row-compressed realization; fails above `caps.sparse_qubits`.
pub fn realize_sparse(op: &PauliSum, caps: &Caps) -> Result<CsrMatrix> {
    let pop = PauliOperator::new(op, caps)?;
    let d = 1usize << op.n_qubits();
    let rows: Vec<Vec<(u32, Complex64)>> = par::map_range(Exec::current(), d, |r| {
        let mut entries: Vec<(u32, Complex64)> = Vec::with_capacity(pop.groups.len());
        for (xm, zs) in &pop.groups {
            let c = r as u64 ^ xm;
            let mut coef = Complex64::new(0.0, 0.0);
            for &(zm, a) in zs {
                if (c & zm).count_ones().is_multiple_of(2) {
                    coef += a;
                } else {
                    coef -= a;
                }
            }
            if coef.norm() > 0.0 {
                entries.push((c as u32, coef));
            }
        }
        entries.sort_by_key(|e| e.0);
        entries
    });
    let mut row_ptr = Vec::with_capacity(d + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(CsrMatrix {
        dim: d,
        row_ptr,
        cols,
        vals,
    })
}

/// Realize with the storage chosen by the dense threshold.
pub fn realize(op: &PauliSum, caps: &Caps) -> Result<OperatorMatrix> {
    let n = op.n_qubits();
    let hermitian = op.is_hermitian(1e-14);
    let storage = if n <= caps.dense_qubits {
        Storage::Dense(realize_dense(op, caps)?)
    } else if n <= caps.sparse_qubits {
        Storage::Sparse(realize_sparse(op, caps)?)
    } else {
        return Err(Error::Resource {
            what: "realization qubits".into(),
            needed: n,
            cap: caps.sparse_qubits,
        });
    };
    Ok(OperatorMatrix {
        n_qubits: n,
        storage,
        hermitian,
    })
}

/// Dense matrix of a single Pauli string.
pub fn pauli_matrix(p: &PauliString) -> Result<Mat<Complex64>> {
    let mut s = PauliSum::new(p.n_qubits());
    s.push_real(1.0, p.clone())?;
    realize_dense(&s, &Caps::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::pauli::PauliString;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn projector_onto_one() {
        let mut s = PauliSum::new(1);
        s.push_real(0.5, PauliString::parse("I").unwrap()).unwrap();
        s.push_real(-0.5, PauliString::parse("Z").unwrap()).unwrap();
        let m = realize(&s, &Caps::default()).unwrap();
        assert!(m.is_hermitian());
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], c(0.0));
        assert_eq!(d[(1, 1)], c(1.0));
        assert_eq!(d[(0, 1)], c(0.0));
    }

    #[test]
    fn sparse_matches_dense() {
        let mut s = PauliSum::new(5);
        for (w, l) in [(0.3, "XYZII"), (-1.2, "ZIIZZ"), (0.7, "IYYXI"), (0.1, "IIIII")] {
            s.push_real(w, PauliString::parse(l).unwrap()).unwrap();
        }
        s.push(Complex64::new(0.0, 0.4), PauliString::parse("XXIII").unwrap()).unwrap();
        let dense = realize_dense(&s, &Caps::default()).unwrap();
        let sparse = realize_sparse(&s, &Caps::default()).unwrap().to_dense();
        let pop = PauliOperator::new(&s, &Caps::default()).unwrap();
        let x: Vec<Complex64> = (0..32).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); 32];
        pop.apply(&x, &mut y);
        for r in 0..32 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..32 {
                assert!((dense[(r, k)] - sparse[(r, k)]).norm() < 1e-15);
                acc += dense[(r, k)] * x[k];
            }
            assert!((acc - y[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn caps_enforced() {
        let s = PauliSum::new(13);
        let caps = Caps::default();
        assert!(matches!(realize_dense(&s, &caps), Err(Error::Resource { .. })));
        assert!(realize(&s, &caps).unwrap().storage().clone().is_sparse());
        let big = PauliSum::new(21);
        assert!(matches!(realize(&big, &caps), Err(Error::Resource { cap: 20, .. })));
    }

    impl Storage {
        fn is_sparse(&self) -> bool {
            matches!(self, Storage::Sparse(_))
        }
    }
}
