//! Pauli strings over GF(2) with exact phase tracking.
//!
//! A string is stored as `i^k · X^x · Z^z` with bit-packed masks, which turns
//! multiplication into XOR plus a popcount for the phase.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// Overall phase `i^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Phase {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u32 {
        self.0 as u32
    }

    pub fn value(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }
}

/// A multi-qubit Pauli operator.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// exponent of `i` in the `X^x Z^z` form
    k: u8,
}

fn words(n: usize) -> usize {
    n.div_ceil(WORD).max(1)
}

fn popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(p, q)| (p & q).count_ones()).sum()
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            k: 0,
        }
    }

    /// Product of single-qubit Paulis at the given qubits (phase +1).
    pub fn from_ops(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = PauliString::identity(n);
        for &(q, op) in ops {
            if q >= n {
                return Err(Error::invalid(format!("qubit {q} out of range for {n} qubits")));
            }
            let (a, b) = op.bits();
            let cur = p.get(q);
            if cur != Pauli::I {
                return Err(Error::invalid(format!("qubit {q} listed twice")));
            }
            p.set_bits(q, a, b);
        }
        p.fix_phase(Phase::ONE);
        Ok(p)
    }

    pub fn single(n: usize, q: usize, op: Pauli) -> Result<Self> {
        PauliString::from_ops(n, &[(q, op)])
    }

    /// Parse a label such as `"-XIZY"`; character `i` acts on qubit `i`.
    /// Accepted prefixes: `+`, `-`, `i`, `-i`, `+i`.
    pub fn parse(label: &str) -> Result<Self> {
        let (phase, body) = if let Some(rest) = label.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = label.strip_prefix("+i") {
            (Phase::I, rest)
        } else if let Some(rest) = label.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = label.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = label.strip_prefix('+') {
            (Phase::ONE, rest)
        } else {
            (Phase::ONE, label)
        };
        let n = body.chars().count();
        let mut p = PauliString::identity(n);
        for (q, c) in body.chars().enumerate() {
            let op = Pauli::from_char(c)
                .ok_or_else(|| Error::invalid(format!("bad Pauli character {c:?}")))?;
            let (a, b) = op.bits();
            p.set_bits(q, a, b);
        }
        p.fix_phase(phase);
        Ok(p)
    }

    fn set_bits(&mut self, q: usize, xb: bool, zb: bool) {
        let (w, b) = (q / WORD, q % WORD);
        let m = 1u64 << b;
        if xb {
            self.x[w] |= m;
        } else {
            self.x[w] &= !m;
        }
        if zb {
            self.z[w] |= m;
        } else {
            self.z[w] &= !m;
        }
    }

    /// Set the internal exponent so the displayed phase equals `phase`.
    fn fix_phase(&mut self, phase: Phase) {
        let y = popcount(&self.x, &self.z);
        self.k = ((phase.power() + y) % 4) as u8;
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, q: usize) -> Pauli {
        let (w, b) = (q / WORD, q % WORD);
        let xb = (self.x[w] >> b) & 1 == 1;
        let zb = (self.z[w] >> b) & 1 == 1;
        match (xb, zb) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// Phase in front of the tensor product of `I, X, Y, Z` labels.
    pub fn phase(&self) -> Phase {
        let y = popcount(&self.x, &self.z);
        Phase::from_power(self.k as u32 + 4 - y % 4)
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.fix_phase(phase);
        self
    }

    pub fn x_mask(&self) -> &[u64] {
        &self.x
    }

    pub fn z_mask(&self) -> &[u64] {
        &self.z
    }

    /// `i^k` of the `X^x Z^z` form.
    pub fn xz_phase(&self) -> Phase {
        Phase(self.k)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity_mask(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase().is_real()
    }

    /// Same masks, equal up to phase.
    pub fn same_masks(&self, other: &PauliString) -> bool {
        self.x == other.x && self.z == other.z
    }

    fn check_size(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::invalid(format!(
                "site counts differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// Symplectic product; `true` when the strings commute.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_size(other)?;
        let s = popcount(&self.x, &other.z) + popcount(&self.z, &other.x);
        Ok(s.is_multiple_of(2))
    }

    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        self.check_size(other)?;
        // Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1
        let sign = popcount(&self.z, &other.x) % 2;
        let k = (self.k as u32 + other.k as u32 + 2 * sign) % 4;
        Ok(PauliString {
            n: self.n,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
            k: k as u8,
        })
    }

    pub fn adjoint(&self) -> PauliString {
        // (X^x Z^z)^† = Z^z X^x = (-1)^{x.z} X^x Z^z
        let sign = popcount(&self.x, &self.z) % 2;
        let k = (4 - self.k as u32 + 2 * sign) % 4;
        PauliString {
            k: k as u8,
            ..self.clone()
        }
    }

    /// Action on a computational basis state: `P|b> = c |b'>`.
    /// Only valid for strings on at most 64 qubits.
    #[inline]
    pub fn apply_basis(&self, b: u64) -> (u64, Complex64) {
        let x = self.x[0];
        let z = self.z[0];
        let s = (b & z).count_ones() % 2;
        let k = (self.k as u32 + 2 * s) % 4;
        (b ^ x, Phase::from_power(k).value())
    }

    /// Restrict to the listed qubits, relabelled `0..qubits.len()`.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            let (a, b) = self.get(q).bits();
            p.set_bits(i, a, b);
        }
        p.fix_phase(self.phase());
        p
    }

    /// Embed a string on `qubits.len()` qubits into `n` qubits.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliString> {
        if qubits.len() != self.n {
            return Err(Error::invalid("embedding length mismatch"));
        }
        let mut p = PauliString::identity(n);
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(Error::invalid(format!("qubit {q} out of range")));
            }
            let (a, b) = self.get(i).bits();
            p.set_bits(q, a, b);
        }
        p.fix_phase(self.phase());
        Ok(p)
    }

    /// Label without phase, e.g. `"XIZ"`.
    pub fn body(&self) -> String {
        (0..self.n).map(|q| self.get(q).to_char()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.phase().power() {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{p}{}", self.body())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.mul(b)
}

pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    a.commutes(b)
}

/// A complex-weighted sum of Pauli strings on a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum { n, terms: Vec::new() }
    }

    pub fn from_terms(n: usize, terms: Vec<(Complex64, PauliString)>) -> Result<Self> {
        let mut s = PauliSum::new(n);
        for (c, p) in terms {
            s.push(c, p)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, coeff: Complex64, p: PauliString) -> Result<()> {
        if p.n_qubits() != self.n {
            return Err(Error::invalid(format!(
                "term on {} qubits pushed into sum on {}",
                p.n_qubits(),
                self.n
            )));
        }
        self.terms.push((coeff, p));
        Ok(())
    }

    pub fn push_real(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        self.push(Complex64::new(coeff, 0.0), p)
    }

    pub fn extend(&mut self, other: &PauliSum) -> Result<()> {
        for (c, p) in &other.terms {
            self.push(*c, p.clone())?;
        }
        Ok(())
    }

    pub fn scaled(&self, a: Complex64) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self.terms.iter().map(|(c, p)| (c * a, p.clone())).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficients in the `X^x Z^z` basis with equal masks merged and
    /// exact zeros dropped, in first-seen order.
    pub fn combined(&self) -> Vec<(Complex64, PauliString)> {
        let mut out: Vec<(Complex64, PauliString)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (c, p) in &self.terms {
            let bare = PauliString {
                k: 0,
                ..p.clone()
            };
            let v = c * p.xz_phase().value();
            match index.get(&bare) {
                Some(&i) => {
                    let e: &mut (Complex64, PauliString) = &mut out[i];
                    e.0 += v;
                }
                None => {
                    index.insert(bare.clone(), out.len());
                    out.push((v, bare));
                }
            }
        }
        out.retain(|(c, _)| c.norm() > 0.0);
        out
    }

    /// Hermitian when every merged coefficient is real in the Hermitian
    /// Pauli basis.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.combined().iter().all(|(c, p)| {
            let herm = c * Phase::from_power(4 - popcount(&p.x, &p.z) % 4).value();
            herm.im.abs() <= tol
        })
    }

    /// Merged coefficients on label strings with unit display phase.
    pub fn combined_hermitian(&self) -> Vec<(Complex64, PauliString)> {
        self.combined()
            .into_iter()
            .map(|(c, p)| {
                let herm = c * Phase::from_power(4 - popcount(&p.x, &p.z) % 4).value();
                (herm, p.with_phase(Phase::ONE))
            })
            .collect()
    }

    /// Restrict to `qubits`; every term must be supported there.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliSum> {
        let mut out = PauliSum::new(qubits.len());
        for (c, p) in &self.terms {
            if p.support().iter().any(|q| !qubits.contains(q)) {
                return Err(Error::invalid(format!("term {p} acts outside the given qubits")));
            }
            out.terms.push((*c, p.restrict(qubits)));
        }
        Ok(out)
    }

    /// Embed a sum on `qubits.len()` qubits into `n` qubits.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliSum> {
        let mut out = PauliSum::new(n);
        for (c, p) in &self.terms {
            out.terms.push((*c, p.embed(n, qubits)?));
        }
        Ok(out)
    }

    /// Union of the supports of all terms.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().flat_map(|(_, p)| p.support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    #[test]
    fn single_qubit_table() {
        assert_eq!(p("X").mul(&p("Z")).unwrap(), p("-iY"));
        assert_eq!(p("Z").mul(&p("X")).unwrap(), p("iY"));
        assert_eq!(p("X").mul(&p("Y")).unwrap(), p("iZ"));
        let xx = p("X").mul(&p("X")).unwrap();
        assert!(xx.is_identity_mask());
        assert_eq!(xx.phase(), Phase::ONE);
        let yy = p("Y").mul(&p("Y")).unwrap();
        assert_eq!(yy, p("I"));
    }

    #[test]
    fn commutation_examples() {
        assert!(!p("XXI").commutes(&p("IZZ")).unwrap());
        assert!(p("XXI").commutes(&p("ZZI")).unwrap());
        assert!(p("XI").commutes(&p("XII")).is_err());
    }

    #[test]
    fn display_round_trip() {
        for s in ["XYZI", "-XYZ", "iY", "-iZZ", "IIII"] {
            assert_eq!(p(s).to_string(), s);
        }
    }

    #[test]
    fn adjoint_and_hermiticity() {
        assert!(p("XYZ").is_hermitian());
        assert!(!p("iXYZ").is_hermitian());
        assert_eq!(p("iXY").adjoint(), p("-iXY"));
        assert_eq!(p("-Y").adjoint(), p("-Y"));
    }

    #[test]
    fn restrict_and_embed() {
        let s = p("-XIZY");
        let r = s.restrict(&[0, 2, 3]);
        assert_eq!(r, p("-XZY"));
        assert_eq!(r.embed(4, &[0, 2, 3]).unwrap(), s);
    }

    #[test]
    fn many_words() {
        let n = 130;
        let a = PauliString::from_ops(n, &[(3, Pauli::X), (100, Pauli::Z), (129, Pauli::Y)]).unwrap();
        let b = PauliString::from_ops(n, &[(100, Pauli::X), (129, Pauli::Y)]).unwrap();
        assert!(!a.commutes(&b).unwrap());
        assert_eq!(a.mul(&b).unwrap().support(), vec![3, 100]);
        assert_eq!(a.weight(), 3);
    }

    #[test]
    fn sum_hermiticity() {
        let mut s = PauliSum::new(2);
        s.push_real(0.5, p("XY")).unwrap();
        s.push_real(-1.0, p("ZZ")).unwrap();
        assert!(s.is_hermitian(1e-14));
        s.push(Complex64::new(0.0, 1.0), p("XX")).unwrap();
        assert!(!s.is_hermitian(1e-14));
        // i·(XZ) = i·(-iY) = Y is Hermitian once merged with its factors
        let mut t = PauliSum::new(1);
        t.push(Complex64::new(0.0, 1.0), p("X").mul(&p("Z")).unwrap()).unwrap();
        assert!(t.is_hermitian(1e-14));
    }
}
