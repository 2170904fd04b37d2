//! GF(2) linear algebra on stabilizer generators.

use crate::error::{Error, Result};
use crate::operators::{Pauli, PauliString, Phase};

/// Dense bit vector over GF(2).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            len,
            words: vec![0; len.div_ceil(64).max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn xor_with(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        for (i, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Symplectic vector `(x|z)` of a Pauli string restricted to `qubits`.
pub fn symplectic(p: &PauliString, qubits: &[usize]) -> Bits {
    let k = qubits.len();
    let mut b = Bits::zeros(2 * k);
    for (i, &q) in qubits.iter().enumerate() {
        let (x, z) = match p.get(q) {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        };
        b.set(i, x);
        b.set(k + i, z);
    }
    b
}

/// Rank of a set of GF(2) rows.
pub fn rank(mut rows: Vec<Bits>) -> usize {
    let mut r = 0;
    let n = rows.len();
    for i in 0..n {
        if let Some(col) = rows[i].first_one() {
            let pivot = rows[i].clone();
            for row in rows.iter_mut().skip(i + 1) {
                if row.get(col) {
                    row.xor_with(&pivot);
                }
            }
            r += 1;
        }
    }
    r
}

/// Row-reduced basis of a GF(2) span, tracking pivot columns.
#[derive(Debug, Clone)]
pub struct Span {
    rows: Vec<(usize, Bits)>,
}

impl Span {
    pub fn new(vectors: impl IntoIterator<Item = Bits>) -> Self {
        let mut s = Span { rows: Vec::new() };
        for v in vectors {
            s.insert(v);
        }
        s
    }

    pub fn reduce(&self, mut v: Bits) -> Bits {
        for (col, row) in &self.rows {
            if v.get(*col) {
                v.xor_with(row);
            }
        }
        v
    }

    /// Adds `v`; returns false when it was already in the span.
    pub fn insert(&mut self, v: Bits) -> bool {
        let v = self.reduce(v);
        match v.first_one() {
            None => false,
            Some(col) => {
                for (_, row) in self.rows.iter_mut() {
                    if row.get(col) {
                        row.xor_with(&v);
                    }
                }
                self.rows.push((col, v));
                true
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> Vec<Bits> {
        self.rows.iter().map(|(_, r)| r.clone()).collect()
    }
}

/// The group generated by commuting Hermitian Pauli strings.
#[derive(Debug, Clone)]
pub struct StabilizerGroup {
    n: usize,
    generators: Vec<PauliString>,
    /// Independent elements in reduced form with their pivot columns.
    basis: Vec<(usize, PauliString)>,
}

fn column(p: &PauliString, c: usize) -> bool {
    let n = p.n_qubits();
    let op = p.get(c % n);
    if c < n {
        matches!(op, Pauli::X | Pauli::Y)
    } else {
        matches!(op, Pauli::Z | Pauli::Y)
    }
}

fn first_column(p: &PauliString) -> Option<usize> {
    (0..2 * p.n_qubits()).find(|&c| column(p, c))
}

impl StabilizerGroup {
    /// Fails with [`Error::Frustrated`] when `-I` lies in the group.
    pub fn new(n: usize, generators: &[PauliString]) -> Result<Self> {
        let mut g = StabilizerGroup {
            n,
            generators: generators.to_vec(),
            basis: Vec::new(),
        };
        for p in generators {
            if p.n_qubits() != n {
                return Err(Error::invalid("generator size mismatch"));
            }
            if let Some(sign) = g.insert(p.clone())? {
                if sign != Phase::ONE {
                    return Err(Error::Frustrated);
                }
            }
        }
        Ok(g)
    }

    fn reduce(&self, mut p: PauliString) -> Result<PauliString> {
        for (col, row) in &self.basis {
            if column(&p, *col) {
                p = row.mul(&p)?;
            }
        }
        Ok(p)
    }

    /// Inserts `p`; when it is already in the group up to phase, returns
    /// the phase of the relation `p · g = phase · I`.
    fn insert(&mut self, p: PauliString) -> Result<Option<Phase>> {
        let r = self.reduce(p)?;
        match first_column(&r) {
            None => Ok(Some(r.phase())),
            Some(col) => {
                for (_, row) in self.basis.iter_mut() {
                    if column(row, col) {
                        *row = r.mul(row)?;
                    }
                }
                self.basis.push((col, r));
                Ok(None)
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Independent elements spanning the group.
    pub fn independent(&self) -> Vec<PauliString> {
        self.basis.iter().map(|(_, p)| p.clone()).collect()
    }

    /// `log2` of the common eigenspace dimension.
    pub fn code_dimension_log2(&self) -> usize {
        self.n - self.rank()
    }

    /// Phase `c` with `c · p` in the group, if `p` is in the group up to phase.
    pub fn contains(&self, p: &PauliString) -> Result<Option<Phase>> {
        let r = self.reduce(p.clone())?;
        Ok(first_column(&r).is_none().then(|| r.phase()))
    }

    fn restricted_rank(&self, qubits: &[usize]) -> usize {
        rank(self.basis.iter().map(|(_, p)| symplectic(p, qubits)).collect())
    }

    /// Dimension of the subgroup supported inside `qubits`.
    pub fn subgroup_dim_on(&self, qubits: &[usize]) -> usize {
        let outside: Vec<usize> = (0..self.n).filter(|q| !qubits.contains(q)).collect();
        self.rank() - self.restricted_rank(&outside)
    }

    /// Dimension (mod phases) of the Paulis on `qubits` commuting with the group.
    pub fn commutant_dim_on(&self, qubits: &[usize]) -> usize {
        2 * qubits.len() - self.restricted_rank(qubits)
    }

    /// Number of independent logical operators supported on `qubits`.
    pub fn logical_dim_on(&self, qubits: &[usize]) -> usize {
        self.commutant_dim_on(qubits) - self.subgroup_dim_on(qubits)
    }
}

/// Result of the syndrome search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SyndromeGap {
    pub gap: usize,
    pub exact: bool,
}

/// Smallest number of terms violated by any Pauli error with a non-zero
/// syndrome, i.e. the gap of `Σ (I - S_i)/2`.
pub fn syndrome_gap(n: usize, terms: &[PauliString], max_enumeration_dim: usize) -> Option<SyndromeGap> {
    let m = terms.len();
    let single: Vec<Bits> = (0..n)
        .flat_map(|q| [Pauli::X, Pauli::Z].map(|op| (q, op)))
        .map(|(q, op)| {
            let e = PauliString::single(n, q, op).expect("qubit in range");
            let mut s = Bits::zeros(m);
            for (i, t) in terms.iter().enumerate() {
                s.set(i, !e.commutes(t).expect("sizes agree"));
            }
            s
        })
        .collect();
    let span = Span::new(single.iter().cloned());
    let basis = span.basis();
    if basis.is_empty() {
        return None;
    }
    if basis.len() <= max_enumeration_dim {
        let d = basis.len();
        let mut cur = Bits::zeros(m);
        let mut best = usize::MAX;
        for i in 1u64..(1u64 << d) {
            let flip = i.trailing_zeros() as usize;
            cur.xor_with(&basis[flip]);
            best = best.min(cur.count_ones());
        }
        return Some(SyndromeGap { gap: best, exact: true });
    }
    let mut best = usize::MAX;
    for i in 0..single.len() {
        if !single[i].is_zero() {
            best = best.min(single[i].count_ones());
        }
        for j in i + 1..single.len() {
            let mut s = single[i].clone();
            s.xor_with(&single[j]);
            if !s.is_zero() {
                best = best.min(s.count_ones());
            }
        }
    }
    Some(SyndromeGap { gap: best, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    #[test]
    fn bell_pair_group() {
        let g = StabilizerGroup::new(2, &[p("XX"), p("ZZ")]).unwrap();
        assert_eq!(g.rank(), 2);
        assert_eq!(g.contains(&p("YY")).unwrap(), Some(Phase::MINUS_ONE));
        assert_eq!(g.contains(&p("XI")).unwrap(), None);
        assert_eq!(g.logical_dim_on(&[0]), 0);
        assert_eq!(g.subgroup_dim_on(&[0, 1]), 2);
    }

    #[test]
    fn frustration_detected() {
        let r = StabilizerGroup::new(2, &[p("XX"), p("ZZ"), p("YY")]);
        assert!(matches!(r, Err(Error::Frustrated)));
        assert!(StabilizerGroup::new(2, &[p("XX"), p("ZZ"), p("-YY")]).is_ok());
    }

    #[test]
    fn repetition_code_logical() {
        let g = StabilizerGroup::new(3, &[p("ZZI"), p("IZZ")]).unwrap();
        assert_eq!(g.code_dimension_log2(), 1);
        assert_eq!(g.logical_dim_on(&[0]), 1);
        let gap = syndrome_gap(3, &[p("ZZI"), p("IZZ"), p("ZIZ")], 20).unwrap();
        assert_eq!(gap, SyndromeGap { gap: 2, exact: true });
    }
}
