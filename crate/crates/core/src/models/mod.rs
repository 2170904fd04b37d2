//! Commuting stabilizer-projector Hamiltonians `H0 = Σ_A Q_A` with
//! `Q_A = (I - S_A)/2`.

mod file;
mod ground;
pub mod stabilizer;

pub use file::{load_model, parse_model, save_model, write_model};
pub use ground::{basis_from_projector, ground_data, local_projector, local_projector_on, GroundData, GroundRepr};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Square, Torus};
use crate::operators::{Pauli, PauliString, PauliSum, Phase};
use stabilizer::{StabilizerGroup, SyndromeGap};

/// One projector term `(I - S)/2` attached to a square.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub square: Square,
    pub stabilizer: PauliString,
}

impl Term {
    pub fn projector(&self) -> PauliSum {
        let n = self.stabilizer.n_qubits();
        let mut s = PauliSum::new(n);
        s.push_real(0.5, PauliString::identity(n)).expect("sizes agree");
        s.push_real(-0.5, self.stabilizer.clone()).expect("sizes agree");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutingProjectorModel {
    pub name: String,
    pub lattice: Lattice,
    pub terms: Vec<Term>,
    pub ground_degeneracy: usize,
}

impl CommutingProjectorModel {
    /// Validates projector form, pairwise commutation, supports and
    /// frustration-freeness, and caches the ground degeneracy.
    pub fn new(name: impl Into<String>, lattice: Lattice, terms: Vec<Term>) -> Result<Self> {
        let n = lattice.n_qubits();
        for (i, t) in terms.iter().enumerate() {
            if t.stabilizer.n_qubits() != n {
                return Err(Error::invalid(format!("term {i} acts on the wrong number of qubits")));
            }
            if !t.stabilizer.phase().is_real() {
                return Err(Error::NonProjector(i));
            }
            if t.square.size > lattice.torus.side() {
                return Err(Error::invalid(format!("term {i} square exceeds the lattice")));
            }
            let inside = lattice.qubits_of(&t.square);
            if t.stabilizer.support().iter().any(|q| !inside.contains(q)) {
                return Err(Error::invalid(format!("term {i} acts outside its square")));
            }
        }
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                if !terms[i].stabilizer.commutes(&terms[j].stabilizer)? {
                    return Err(Error::Commutation { first: i, second: j });
                }
            }
        }
        let gens: Vec<PauliString> = terms.iter().map(|t| t.stabilizer.clone()).collect();
        let group = StabilizerGroup::new(n, &gens)?;
        let log2 = group.code_dimension_log2();
        let ground_degeneracy = if log2 < usize::BITS as usize - 1 { 1usize << log2 } else { usize::MAX };
        Ok(CommutingProjectorModel {
            name: name.into(),
            lattice,
            terms,
            ground_degeneracy,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.n_qubits()
    }

    pub fn torus(&self) -> &Torus {
        &self.lattice.torus
    }

    pub fn stabilizers(&self) -> Vec<PauliString> {
        self.terms.iter().map(|t| t.stabilizer.clone()).collect()
    }

    pub fn group(&self) -> StabilizerGroup {
        StabilizerGroup::new(self.n_qubits(), &self.stabilizers()).expect("validated at construction")
    }

    /// Generators of the terms whose square lies inside `b`.
    pub fn stabilizers_within(&self, b: &Square) -> Vec<PauliString> {
        self.terms
            .iter()
            .filter(|t| t.square.is_within(self.torus(), b))
            .map(|t| t.stabilizer.clone())
            .collect()
    }

    pub fn group_within(&self, b: &Square) -> StabilizerGroup {
        StabilizerGroup::new(self.n_qubits(), &self.stabilizers_within(b)).expect("subset of a consistent group")
    }

    pub fn hamiltonian(&self) -> PauliSum {
        let mut h = PauliSum::new(self.n_qubits());
        for t in &self.terms {
            h.extend(&t.projector()).expect("sizes agree");
        }
        h
    }

    /// Gap of `H0` from the syndrome code when it can be enumerated.
    pub fn syndrome_gap(&self) -> Option<SyndromeGap> {
        stabilizer::syndrome_gap(self.n_qubits(), &self.stabilizers(), 24)
    }

    /// Whether every term is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.stabilizer.x_mask().iter().all(|&w| w == 0))
    }
}

/// Kitaev's toric code on an `L x L` torus.
///
/// Site `v` carries qubit `2v` on the edge `v -> v + x` and `2v + 1` on
/// `v -> v + y`. Stars and plaquettes are attached to the 2x2 square
/// that contains their four edges.
pub fn build_toric_code(l: usize) -> Result<CommutingProjectorModel> {
    if l < 2 {
        return Err(Error::invalid(format!("toric code needs L >= 2, got {l}")));
    }
    let torus = Torus::new(2, l)?;
    let lat = Lattice::new(torus, 2)?;
    let n = lat.n_qubits();
    let mut terms = Vec::with_capacity(2 * l * l);
    for v in 0..torus.site_count() {
        let left = torus.shift(v, [-1, 0]);
        let down = torus.shift(v, [0, -1]);
        let ops = [
            (lat.qubit(v, 0), Pauli::X),
            (lat.qubit(v, 1), Pauli::X),
            (lat.qubit(left, 0), Pauli::X),
            (lat.qubit(down, 1), Pauli::X),
        ];
        let c = torus.coords(torus.shift(v, [-1, -1]));
        terms.push(Term {
            square: Square { anchor: c, size: 2 },
            stabilizer: string_from(n, &ops)?,
        });
    }
    for v in 0..torus.site_count() {
        let up = torus.shift(v, [0, 1]);
        let right = torus.shift(v, [1, 0]);
        let ops = [
            (lat.qubit(v, 0), Pauli::Z),
            (lat.qubit(v, 1), Pauli::Z),
            (lat.qubit(up, 0), Pauli::Z),
            (lat.qubit(right, 1), Pauli::Z),
        ];
        terms.push(Term {
            square: Square {
                anchor: torus.coords(v),
                size: 2,
            },
            stabilizer: string_from(n, &ops)?,
        });
    }
    CommutingProjectorModel::new(format!("toric-L{l}"), lat, terms)
}

/// Ferromagnetic Ising model with edge terms `(I - Z_u Z_v)/2`.
///
/// In two dimensions every site contributes its `+x` and `+y` edge, so
/// `L = 2` lists each bond twice.
pub fn build_ising(l: usize, dim: usize) -> Result<CommutingProjectorModel> {
    if l < 2 {
        return Err(Error::invalid(format!("Ising model needs L >= 2, got {l}")));
    }
    let torus = Torus::new(dim, l)?;
    let lat = Lattice::new(torus, 1)?;
    let n = lat.n_qubits();
    let dirs: Vec<[i64; 2]> = if dim == 1 { vec![[1, 0]] } else { vec![[1, 0], [0, 1]] };
    let mut terms = Vec::new();
    for u in 0..torus.site_count() {
        for d in &dirs {
            let v = torus.shift(u, *d);
            let ops: Vec<(usize, Pauli)> = if u == v {
                vec![]
            } else {
                vec![(u, Pauli::Z), (v, Pauli::Z)]
            };
            terms.push(Term {
                square: Square {
                    anchor: torus.coords(u),
                    size: 2,
                },
                stabilizer: string_from(n, &ops)?,
            });
        }
    }
    CommutingProjectorModel::new(format!("ising-D{dim}-L{l}"), lat, terms)
}

fn string_from(n: usize, ops: &[(usize, Pauli)]) -> Result<PauliString> {
    Ok(PauliString::from_ops(n, ops)?.with_phase(Phase::ONE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toric_counts() {
        for l in 2..=4 {
            let m = build_toric_code(l).unwrap();
            assert_eq!(m.n_qubits(), 2 * l * l);
            assert_eq!(m.terms.len(), 2 * l * l);
            assert_eq!(m.ground_degeneracy, 4);
            assert_eq!(m.group().rank(), 2 * l * l - 2);
        }
    }

    #[test]
    fn star_product_is_identity() {
        let m = build_toric_code(3).unwrap();
        let mut prod = PauliString::identity(m.n_qubits());
        for t in &m.terms[..9] {
            prod = prod.mul(&t.stabilizer).unwrap();
        }
        assert!(prod.is_identity_mask());
        assert_eq!(prod.phase(), Phase::ONE);
    }

    #[test]
    fn toric_gap_from_syndromes() {
        let g = build_toric_code(3).unwrap().syndrome_gap().unwrap();
        assert_eq!(g.gap, 2);
        assert!(g.exact);
    }

    #[test]
    fn ising_structure() {
        let m = build_ising(3, 1).unwrap();
        assert_eq!((m.n_qubits(), m.terms.len(), m.ground_degeneracy), (3, 3, 2));
        assert!(m.is_diagonal());
        let m2 = build_ising(2, 2).unwrap();
        assert_eq!((m2.n_qubits(), m2.terms.len(), m2.ground_degeneracy), (4, 8, 2));
    }

    #[test]
    fn rejects_anticommuting_terms() {
        let lat = Lattice::new(Torus::new(1, 2).unwrap(), 1).unwrap();
        let sq = Square { anchor: [0, 0], size: 1 };
        let terms = vec![
            Term { square: sq, stabilizer: PauliString::parse("XI").unwrap() },
            Term { square: sq, stabilizer: PauliString::parse("ZI").unwrap() },
        ];
        let err = CommutingProjectorModel::new("bad", lat, terms).unwrap_err();
        assert!(matches!(err, Error::Commutation { first: 0, second: 1 }));
    }
}
