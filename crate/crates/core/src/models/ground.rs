//! Ground-space projectors `P = Π (I - Q_A)` and their local versions.

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::CommutingProjectorModel;
use crate::error::{Error, Result};
use crate::lattice::Square;
use crate::operators::dense::{c, identity, CMat};
use crate::operators::{vector, Caps, OperatorMatrix, PauliString};
use crate::par::{self, Exec};

/// How the ground space is stored.
#[derive(Debug, Clone)]
pub enum GroundRepr {
    /// Full projector matrix.
    Dense(CMat),
    /// Orthonormal columns spanning the ground space.
    Basis(CMat),
    /// Only the stabilizer group is available.
    Stabilizer,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundData {
    pub n_qubits: usize,
    pub degeneracy: usize,
    pub gap: Option<f64>,
    pub gap_exact: bool,
    #[serde(skip)]
    pub repr: GroundRepr,
    pub representation: &'static str,
}

impl GroundData {
    pub fn projector(&self) -> Option<&CMat> {
        match &self.repr {
            GroundRepr::Dense(p) => Some(p),
            _ => None,
        }
    }

    /// Orthonormal ground basis (computed from the projector when dense).
    pub fn basis(&self) -> Option<CMat> {
        match &self.repr {
            GroundRepr::Dense(p) => Some(basis_from_projector(p, self.degeneracy)),
            GroundRepr::Basis(b) => Some(b.clone()),
            GroundRepr::Stabilizer => None,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, GroundRepr::Dense(_))
    }
}

/// Orthonormal columns spanning the range of a rank-`g` projector.
pub fn basis_from_projector(p: &CMat, g: usize) -> CMat {
    let d = p.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51ed_270b);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(g);
    let mut attempts = 0;
    while basis.len() < g && attempts < 4 * g + 8 {
        attempts += 1;
        let r: Vec<Complex64> = (0..d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        let mut v: Vec<Complex64> = (0..d).map(|i| (0..d).map(|k| p[(i, k)] * r[k]).sum()).collect();
        let before = vector::norm(&v);
        vector::orthogonalize(&basis, &mut v);
        let after = vector::norm(&v);
        if after > 1e-6 * before && after > 0.0 {
            vector::scale(c(1.0 / after), &mut v);
            basis.push(v);
        }
    }
    Mat::from_fn(d, basis.len(), |r, j| basis[j][r])
}

/// `M <- M (I + S)/2`, acting on columns.
fn right_multiply_half_plus(m: &mut CMat, s: &PauliString) {
    let d = m.ncols();
    let rows = m.nrows();
    let cols: Vec<Vec<Complex64>> = par::map_range(Exec::current(), d, |col| {
        // S|col> = ph |col ^ x>, so (M S)[:, col] = ph M[:, col ^ x]
        let (partner, ph) = s.apply_basis(col as u64);
        let partner = partner as usize;
        (0..rows).map(|r| (m[(r, col)] + m[(r, partner)] * ph) * 0.5).collect()
    });
    for (col, v) in cols.into_iter().enumerate() {
        for (r, x) in v.into_iter().enumerate() {
            m[(r, col)] = x;
        }
    }
}

/// `v <- (I + S)/2 v`.
fn apply_half_plus(v: &mut [Complex64], s: &PauliString) {
    let x = s.x_mask()[0];
    let snapshot = v.to_vec();
    par::fill(Exec::current(), v, |r| {
        let k = r as u64 ^ x;
        let (_, ph) = s.apply_basis(k);
        (snapshot[r] + ph * snapshot[k as usize]) * 0.5
    });
}

fn projector_from(n: usize, stabilizers: &[PauliString]) -> CMat {
    let mut p = identity(1 << n);
    for s in stabilizers {
        right_multiply_half_plus(&mut p, s);
    }
    p
}

/// `P` or an orthonormal ground basis, depending on size.
pub fn ground_data(model: &CommutingProjectorModel, caps: &Caps) -> Result<GroundData> {
    let n = model.n_qubits();
    let g = model.ground_degeneracy;
    let sg = model.syndrome_gap();
    let (gap, gap_exact) = match sg {
        Some(s) => (Some(s.gap as f64), s.exact),
        None => (None, true),
    };
    let stabs = model.stabilizers();
    if n <= caps.dense_qubits {
        return Ok(GroundData {
            n_qubits: n,
            degeneracy: g,
            gap,
            gap_exact,
            repr: GroundRepr::Dense(projector_from(n, &stabs)),
            representation: "dense",
        });
    }
    if n <= caps.sparse_qubits && g <= 64 {
        let d = 1usize << n;
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(g);
        let mut attempts = 0;
        while basis.len() < g {
            attempts += 1;
            if attempts > 4 * g + 8 {
                return Err(Error::numerical("could not assemble the ground basis", basis.len() as f64));
            }
            let mut v: Vec<Complex64> = (0..d)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            for s in &stabs {
                apply_half_plus(&mut v, s);
            }
            let before = vector::norm(&v);
            vector::orthogonalize(&basis, &mut v);
            let after = vector::norm(&v);
            if after > 1e-6 * before && after > 0.0 {
                vector::scale(c(1.0 / after), &mut v);
                basis.push(v);
            }
        }
        let b = Mat::from_fn(d, g, |r, j| basis[j][r]);
        return Ok(GroundData {
            n_qubits: n,
            degeneracy: g,
            gap,
            gap_exact,
            repr: GroundRepr::Basis(b),
            representation: "basis",
        });
    }
    Ok(GroundData {
        n_qubits: n,
        degeneracy: g,
        gap,
        gap_exact,
        repr: GroundRepr::Stabilizer,
        representation: "stabilizer",
    })
}

/// `P_B` on the full space.
pub fn local_projector(model: &CommutingProjectorModel, b: &Square, caps: &Caps) -> Result<OperatorMatrix> {
    let n = model.n_qubits();
    if n > caps.dense_qubits {
        return Err(Error::Resource {
            what: "local projector on the full space; qubits".into(),
            needed: n,
            cap: caps.dense_qubits,
        });
    }
    OperatorMatrix::from_dense(projector_from(n, &model.stabilizers_within(b)))
}

/// `P_B` restricted to the (sorted) qubits of `B`.
pub fn local_projector_on(model: &CommutingProjectorModel, b: &Square, caps: &Caps) -> Result<(Vec<usize>, CMat)> {
    let mut q = model.lattice.qubits_of(b);
    q.sort_unstable();
    q.dedup();
    if q.len() > caps.dense_qubits {
        return Err(Error::Resource {
            what: "local projector qubits".into(),
            needed: q.len(),
            cap: caps.dense_qubits,
        });
    }
    let stabs: Vec<PauliString> = model.stabilizers_within(b).iter().map(|s| s.restrict(&q)).collect();
    Ok((q.clone(), projector_from(q.len(), &stabs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_ising, build_toric_code};
    use crate::operators::dense::{max_abs, trace};
    use crate::operators::realize_dense;

    #[test]
    fn toric_projector_identities() {
        let m = build_toric_code(2).unwrap();
        let gd = ground_data(&m, &Caps::default()).unwrap();
        let p = gd.projector().unwrap();
        assert!((trace(p).re - 4.0).abs() < 1e-10);
        assert!(max_abs(&(p * p - p)) < 1e-12);
        let h = realize_dense(&m.hamiltonian(), &Caps::default()).unwrap();
        assert!(max_abs(&(&h * p)) < 1e-10);
        assert_eq!(gd.gap, Some(2.0));
    }

    #[test]
    fn basis_representation() {
        let m = build_ising(4, 2).unwrap();
        let gd = ground_data(&m, &Caps::default()).unwrap();
        let b = gd.basis().unwrap();
        assert_eq!(b.ncols(), 2);
        let gram = b.adjoint() * &b;
        assert!(max_abs(&(gram - identity(2))) < 1e-12);
    }

    #[test]
    fn full_square_local_projector_is_p() {
        let m = build_toric_code(2).unwrap();
        let caps = Caps::default();
        let gd = ground_data(&m, &caps).unwrap();
        let pb = local_projector(&m, &m.torus().full_square(), &caps).unwrap();
        assert!(max_abs(&(pb.to_dense() - gd.projector().unwrap())) < 1e-14);
        let tiny = local_projector(&m, &Square { anchor: [0, 0], size: 1 }, &caps).unwrap();
        assert!(max_abs(&(tiny.to_dense() - identity(256))) < 1e-14);
    }
}
