//! Conditional expectations, shell profiles, Pauli expansions and norms.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::{self, c, CMat};
use super::krylov::{self, FnOperator, LanczosOptions, Which};
use super::matrix::{LinearOperator, OperatorMatrix};
use super::pauli::{PauliString, PauliSum};
use super::Pauli;
use crate::error::{Error, Result};
use crate::lattice::{self, Lattice, Square};
use crate::par::{self, Exec};

/// Bit patterns `Σ_i bit_i(a) 2^{q_i}` for every `a < 2^{|qubits|}`.
fn expansions(qubits: &[usize]) -> Vec<usize> {
    let k = qubits.len();
    (0..1usize << k)
        .map(|a| {
            let mut v = 0usize;
            for (i, &q) in qubits.iter().enumerate() {
                if a >> i & 1 == 1 {
                    v |= 1 << q;
                }
            }
            v
        })
        .collect()
}

fn complement(n: usize, qubits: &[usize]) -> Vec<usize> {
    (0..n).filter(|q| !qubits.contains(q)).collect()
}

fn check_qubits(n: usize, qubits: &[usize]) -> Result<Vec<usize>> {
    let mut q = qubits.to_vec();
    q.sort_unstable();
    q.dedup();
    if q.last().is_some_and(|&m| m >= n) {
        return Err(Error::invalid(format!("qubit list {qubits:?} exceeds {n} qubits")));
    }
    Ok(q)
}

/// `Tr_{complement}(M)` as a `2^k × 2^k` matrix in the order of `keep`.
pub fn partial_trace(m: &CMat, n: usize, keep: &[usize]) -> Result<CMat> {
    let keep = check_qubits(n, keep)?;
    if m.nrows() != 1 << n {
        return Err(Error::invalid("matrix size does not match qubit count"));
    }
    let ek = expansions(&keep);
    let ec = expansions(&complement(n, &keep));
    let dk = ek.len();
    let cols: Vec<Vec<Complex64>> = par::map_range(Exec::current(), dk, |b| {
        (0..dk)
            .map(|a| ec.iter().map(|&t| m[(ek[a] | t, ek[b] | t)]).sum())
            .collect()
    });
    Ok(Mat::from_fn(dk, dk, |a, b| cols[b][a]))
}

/// Reduced operator `Tr_{complement}(|ψ⟩⟨ψ|)` of a block of vectors, summed.
pub fn partial_trace_of_columns(vectors: &CMat, n: usize, keep: &[usize]) -> Result<CMat> {
    let keep = check_qubits(n, keep)?;
    let ek = expansions(&keep);
    let ec = expansions(&complement(n, &keep));
    let dk = ek.len();
    let mut out = Mat::<Complex64>::zeros(dk, dk);
    for col in 0..vectors.ncols() {
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = c(0.0);
                for &t in &ec {
                    acc += vectors[(ek[a] | t, col)] * vectors[(ek[b] | t, col)].conj();
                }
                out[(a, b)] += acc;
            }
        }
    }
    Ok(out)
}

/// `local ⊗ I` with `local` acting on `qubits` (in sorted order).
pub fn embed(local: &CMat, n: usize, qubits: &[usize]) -> Result<CMat> {
    let qubits = check_qubits(n, qubits)?;
    let ek = expansions(&qubits);
    if local.nrows() != ek.len() {
        return Err(Error::invalid("local operator size does not match its support"));
    }
    let kmask: usize = qubits.iter().map(|q| 1usize << q).sum();
    let d = 1usize << n;
    let mut compress = vec![0usize; d];
    for (a, &e) in ek.iter().enumerate() {
        compress[e] = a;
    }
    let mut out = Mat::<Complex64>::zeros(d, d);
    for r in 0..d {
        let base = r & !kmask;
        let a = compress[r & kmask];
        for (b, &e) in ek.iter().enumerate() {
            out[(r, base | e)] = local[(a, b)];
        }
    }
    Ok(out)
}

/// The normalized partial trace onto `qubits`, re-embedded.
pub fn conditional_expectation_qubits(m: &CMat, n: usize, qubits: &[usize]) -> Result<CMat> {
    let qubits = check_qubits(n, qubits)?;
    if qubits.len() == n {
        return Ok(m.clone());
    }
    let red = partial_trace(m, n, &qubits)?;
    let scale = 1.0 / (1u64 << (n - qubits.len())) as f64;
    embed(&(red * faer::Scale(c(scale))), n, &qubits)
}

/// Conditional expectation onto the qubits of a square.
pub fn conditional_expectation(m: &OperatorMatrix, lat: &Lattice, region: &Square) -> Result<OperatorMatrix> {
    let dm = m.dense().ok_or_else(|| Error::Resource {
        what: "conditional expectation needs a dense operator; qubits".into(),
        needed: m.n_qubits(),
        cap: crate::operators::Caps::default().dense_qubits,
    })?;
    let q = lat.qubits_of(region);
    OperatorMatrix::from_dense(conditional_expectation_qubits(dm, m.n_qubits(), &q)?)
}

/// Terms of a Pauli sum supported inside `qubits`.
pub fn conditional_expectation_pauli(sum: &PauliSum, qubits: &[usize]) -> PauliSum {
    let mut out = PauliSum::new(sum.n_qubits());
    for (coef, p) in sum.terms() {
        if p.support().iter().all(|q| qubits.contains(q)) {
            out.push(*coef, p.clone()).expect("sizes agree");
        }
    }
    out
}

/// Shell decomposition of an operator around a site.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalityProfile {
    pub center: usize,
    pub norms_by_radius: Vec<(usize, f64)>,
    pub residual_norm: f64,
    #[serde(skip)]
    pub shells: Vec<CMat>,
}

impl LocalityProfile {
    /// Sum of all shells.
    pub fn reconstruct(&self) -> Option<CMat> {
        let mut it = self.shells.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, s| acc + s))
    }

    /// Smallest radius with a shell norm at or above `tol`.
    pub fn first_nonzero(&self, tol: f64) -> Option<usize> {
        self.norms_by_radius.iter().find(|(_, v)| *v >= tol).map(|(l, _)| *l)
    }
}

/// Shells `V_l = E_{b_l(u)}[M] - E_{b_{l-1}(u)}[M]` up to the full lattice.
pub fn locality_profile_dense(m: &CMat, lat: &Lattice, u: usize) -> Result<LocalityProfile> {
    let n = lat.n_qubits();
    let torus = &lat.torus;
    let mut shells = Vec::new();
    let mut norms = Vec::new();
    let mut prev: Option<CMat> = None;
    let mut l = 0usize;
    loop {
        let b = lattice::site_ball(torus, u, l);
        let full = b.square.covers_lattice(torus);
        let e = conditional_expectation_qubits(m, n, &lat.qubits_of(&b.square))?;
        let shell = match &prev {
            Some(p) => &e - p,
            None => e.clone(),
        };
        norms.push((l, dense::spectral_norm(&shell)?));
        shells.push(shell);
        if full {
            let residual = m - &e;
            return Ok(LocalityProfile {
                center: u,
                norms_by_radius: norms,
                residual_norm: dense::spectral_norm(&residual)?,
                shells,
            });
        }
        prev = Some(e);
        l += 1;
    }
}

pub fn locality_profile(m: &OperatorMatrix, lat: &Lattice, u: usize) -> Result<LocalityProfile> {
    let dm = m.dense().ok_or_else(|| Error::Resource {
        what: "locality profile needs a dense operator; qubits".into(),
        needed: m.n_qubits(),
        cap: crate::operators::Caps::default().dense_qubits,
    })?;
    locality_profile_dense(dm, lat, u)
}

/// Coefficients `a_{x,z}` with `M = Σ a_{x,z} X^x Z^z`, dropping `|a| ≤ tol`.
pub fn pauli_expansion(m: &CMat, tol: f64) -> Vec<(u64, u64, Complex64)> {
    let d = m.nrows();
    let scale = 1.0 / d as f64;
    let per_x: Vec<Vec<(u64, u64, Complex64)>> = par::map_range(Exec::current(), d, |x| {
        let mut f: Vec<Complex64> = (0..d).map(|b| m[(b ^ x, b)]).collect();
        let mut h = 1;
        while h < d {
            for i in (0..d).step_by(2 * h) {
                for j in i..i + h {
                    let (a, b) = (f[j], f[j + h]);
                    f[j] = a + b;
                    f[j + h] = a - b;
                }
            }
            h *= 2;
        }
        f.into_iter()
            .enumerate()
            .filter_map(|(z, v)| {
                let a = v * scale;
                (a.norm() > tol).then_some((x as u64, z as u64, a))
            })
            .collect()
    });
    per_x.into_iter().flatten().collect()
}

fn bare_string(n: usize, x: u64, z: u64) -> PauliString {
    let ops: Vec<(usize, Pauli)> = (0..n)
        .filter_map(|q| match (x >> q & 1, z >> q & 1) {
            (0, 0) => None,
            (1, 0) => Some((q, Pauli::X)),
            (0, 1) => Some((q, Pauli::Z)),
            _ => Some((q, Pauli::Y)),
        })
        .collect();
    PauliString::from_ops(n, &ops).expect("qubits in range")
}

/// Pauli sum in the Hermitian basis (`I, X, Y, Z` products) equal to `M`.
pub fn to_pauli_sum(m: &CMat, tol: f64) -> PauliSum {
    let n = m.nrows().trailing_zeros() as usize;
    let mut out = PauliSum::new(n);
    for (x, z, a) in pauli_expansion(m, tol) {
        let y = (x & z).count_ones();
        // X^x Z^z = i^{-y} (Hermitian string)
        let coef = a * super::Phase::from_power(4 - y % 4).value();
        out.push(coef, bare_string(n, x, z)).expect("sizes agree");
    }
    out
}

/// One piece of the canonical square decomposition.
#[derive(Debug, Clone)]
pub struct SquareTerm {
    pub square: Square,
    pub op: PauliSum,
}

impl SquareTerm {
    pub fn radius(&self) -> usize {
        self.square.size
    }

    /// Site the term is attributed to: the square's anchor.
    pub fn site(&self, lat: &Lattice) -> usize {
        lat.torus.index(self.square.anchor)
    }
}

/// Groups Pauli components by the minimal square enclosing their support.
pub fn square_decomposition_of_sum(sum: &PauliSum, lat: &Lattice) -> Vec<SquareTerm> {
    let mut groups: BTreeMap<(usize, [usize; 2]), SquareTerm> = BTreeMap::new();
    for (coef, p) in sum.combined_hermitian() {
        let sites = lat.sites_of_qubits(&p.support());
        let sq = lattice::enclosing_square(&lat.torus, &sites);
        let key = (sq.size, [sq.anchor[1], sq.anchor[0]]);
        groups
            .entry(key)
            .or_insert_with(|| SquareTerm {
                square: sq,
                op: PauliSum::new(sum.n_qubits()),
            })
            .op
            .push(coef, p)
            .expect("sizes agree");
    }
    groups.into_values().collect()
}

pub fn square_decomposition(m: &CMat, lat: &Lattice, tol: f64) -> Vec<SquareTerm> {
    square_decomposition_of_sum(&to_pauli_sum(m, tol), lat)
}

/// Spectral norm by Lanczos on `M` (Hermitian) or `M^† M`.
pub fn operator_norm(m: &OperatorMatrix) -> Result<f64> {
    operator_norm_with(m, &LanczosOptions::default())
}

pub fn operator_norm_with(m: &OperatorMatrix, opts: &LanczosOptions) -> Result<f64> {
    let d = m.dimension();
    if m.is_hermitian() {
        let hi = krylov::extremal(m, 1, Which::Highest, opts)?.values[0];
        let lo = krylov::extremal(m, 1, Which::Lowest, opts)?.values[0];
        return Ok(hi.abs().max(lo.abs()));
    }
    let adj = match m.storage() {
        super::Storage::Dense(a) => dense::adjoint(a),
        super::Storage::Sparse(s) => dense::adjoint(&s.to_dense()),
    };
    let gram = FnOperator {
        dim: d,
        f: |x: &[Complex64], y: &mut [Complex64]| {
            let mut t = vec![c(0.0); x.len()];
            m.apply(x, &mut t);
            adj.apply(&t, y);
        },
    };
    let top = krylov::extremal(&gram, 1, Which::Highest, opts)?.values[0];
    Ok(top.max(0.0).sqrt())
}

/// Norm of a dense matrix (exact path).
pub fn dense_norm(m: &CMat) -> Result<f64> {
    dense::spectral_norm(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Torus;
    use crate::operators::matrix::{realize_dense, Caps};

    fn sum_of(n: usize, terms: &[(f64, &str)]) -> PauliSum {
        let mut s = PauliSum::new(n);
        for (w, l) in terms {
            s.push_real(*w, PauliString::parse(l).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn expectation_drops_outside_terms() {
        let s = sum_of(3, &[(0.5, "XXI"), (2.0, "ZII"), (1.0, "III")]);
        let m = realize_dense(&s, &Caps::default()).unwrap();
        let e = conditional_expectation_qubits(&m, 3, &[0]).unwrap();
        let expect = realize_dense(&sum_of(3, &[(2.0, "ZII"), (1.0, "III")]), &Caps::default()).unwrap();
        assert!(dense::max_abs(&(&e - &expect)) < 1e-14);
        let ee = conditional_expectation_qubits(&e, 3, &[0]).unwrap();
        assert!(dense::max_abs(&(&ee - &e)) < 1e-14);
    }

    #[test]
    fn partial_trace_scalar() {
        let m = dense::identity(8);
        let r = partial_trace(&m, 3, &[1]).unwrap();
        assert_eq!(r[(0, 0)], c(4.0));
        assert_eq!(r[(0, 1)], c(0.0));
    }

    #[test]
    fn expansion_round_trip() {
        let s = sum_of(3, &[(0.5, "XYZ"), (-1.5, "ZIY"), (0.25, "III")]);
        let m = realize_dense(&s, &Caps::default()).unwrap();
        let back = realize_dense(&to_pauli_sum(&m, 1e-14), &Caps::default()).unwrap();
        assert!(dense::max_abs(&(&m - &back)) < 1e-14);
    }

    #[test]
    fn one_dimensional_profile() {
        let lat = Lattice::new(Torus::new(1, 8).unwrap(), 1).unwrap();
        let s = sum_of(8, &[(1.0, "XIIXIIII")]);
        let m = realize_dense(&s, &Caps::default()).unwrap();
        let prof = locality_profile_dense(&m, &lat, 0).unwrap();
        assert_eq!(prof.first_nonzero(1e-12), Some(3));
        let rec = prof.reconstruct().unwrap();
        assert!(dense::max_abs(&(&rec - &m)) < 1e-12);
    }

    #[test]
    fn norms() {
        let s = sum_of(2, &[(3.0, "XZ")]);
        let m = crate::operators::realize(&s, &Caps::default()).unwrap();
        assert!((operator_norm(&m).unwrap() - 3.0).abs() < 1e-10);
    }
}
