//! Local perturbation families `V = Σ_r Σ_A V_{r,A}` and strength
//! measurements.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, Lattice, Square, Torus};
use crate::models::CommutingProjectorModel;
use crate::operators::dense::{self, CMat};
use crate::operators::locality::{square_decomposition, square_decomposition_of_sum, to_pauli_sum};
use crate::operators::{realize, Caps, Pauli, PauliString, PauliSum, Phase};

/// One interaction `V_{r,A}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTerm {
    pub r: usize,
    pub square: Square,
    pub op: PauliSum,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Decay {
    /// Only one radius is populated.
    SingleRadius { r: usize },
    Exponential { mu: f64 },
    /// Fitted envelope of a measured operator.
    Fitted(EnvelopeFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFamily {
    pub lattice: Lattice,
    pub terms: Vec<FamilyTerm>,
    pub strength_j: f64,
    pub decay: Decay,
    pub r_max: usize,
    pub seed: Option<u64>,
    pub label: String,
}

impl LocalFamily {
    pub fn empty(lattice: Lattice, label: impl Into<String>) -> Self {
        LocalFamily {
            lattice,
            terms: vec![],
            strength_j: 0.0,
            decay: Decay::SingleRadius { r: 1 },
            r_max: 1,
            seed: None,
            label: label.into(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.n_qubits()
    }

    /// `Σ_{r,A} V_{r,A}`.
    pub fn total(&self) -> PauliSum {
        let mut s = PauliSum::new(self.n_qubits());
        for t in &self.terms {
            s.extend(&t.op).expect("sizes agree");
        }
        s
    }

    /// `W(r) = Σ_A V_{r,A}`.
    pub fn at_radius(&self, r: usize) -> PauliSum {
        let mut s = PauliSum::new(self.n_qubits());
        for t in self.terms.iter().filter(|t| t.r == r) {
            s.extend(&t.op).expect("sizes agree");
        }
        s
    }

    pub fn radii(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.terms.iter().map(|t| t.r).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Largest term norm at each populated radius.
    pub fn max_norm_by_radius(&self) -> Vec<(usize, f64)> {
        self.radii()
            .into_iter()
            .map(|r| (r, self.terms.iter().filter(|t| t.r == r).map(|t| t.norm).fold(0.0, f64::max)))
            .collect()
    }

    pub fn scaled(&self, s: f64) -> LocalFamily {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.op = t.op.scaled(Complex64::new(s, 0.0));
            t.norm *= s.abs();
        }
        out.strength_j *= s.abs();
        out
    }
}

fn sorted(mut q: Vec<usize>) -> Vec<usize> {
    q.sort_unstable();
    q.dedup();
    q
}

/// Norm of a sum supported on `qubits`, computed on that subsystem.
pub fn local_norm(op: &PauliSum, qubits: &[usize]) -> Result<f64> {
    let q = sorted(qubits.to_vec());
    let local = op.restrict(&q)?;
    let caps = Caps::default();
    let m = realize(&local, &caps)?;
    match m.dense() {
        Some(d) => dense::spectral_norm(d),
        None => crate::operators::operator_norm(&m),
    }
}

/// `h σ_axis` on every qubit, each attached to its site.
pub fn uniform_field(model: &CommutingProjectorModel, axis: Pauli, h: f64) -> Result<LocalFamily> {
    // written negated so NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(h.abs() < 1.0) {
        return Err(Error::invalid(format!("field strength |h| = {} must be below 1", h.abs())));
    }
    if axis == Pauli::I {
        return Err(Error::invalid("field axis must be X, Y or Z"));
    }
    let lat = model.lattice;
    let n = lat.n_qubits();
    let mut terms = Vec::with_capacity(n);
    for q in 0..n {
        let site = lat.site_of_qubit(q);
        let mut op = PauliSum::new(n);
        op.push_real(h, PauliString::single(n, q, axis)?)?;
        terms.push(FamilyTerm {
            r: 1,
            square: Square {
                anchor: lat.torus.coords(site),
                size: 1,
            },
            op,
            norm: h.abs(),
        });
    }
    Ok(LocalFamily {
        lattice: lat,
        terms,
        strength_j: h.abs(),
        decay: Decay::SingleRadius { r: 1 },
        r_max: 1,
        seed: None,
        label: format!("field-{}-{h}", axis.to_char()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFamilyOptions {
    /// Pauli components drawn per square (all of them when fewer exist).
    pub max_paulis: usize,
}

impl Default for RandomFamilyOptions {
    fn default() -> Self {
        RandomFamilyOptions { max_paulis: 32 }
    }
}

fn pauli_from_code(n: usize, qubits: &[usize], code: u64) -> PauliString {
    let ops = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let list: Vec<(usize, Pauli)> = qubits
        .iter()
        .enumerate()
        .filter_map(|(i, &q)| {
            let op = ops[(code >> (2 * i) & 3) as usize];
            (op != Pauli::I).then_some((q, op))
        })
        .collect();
    PauliString::from_ops(n, &list).expect("distinct qubits")
}

/// Random Hermitian family with `‖V_{r,A}‖ = J e^{-μ r} u`, `u ~ U[0,1]`.
pub fn random_family(
    model: &CommutingProjectorModel,
    j: f64,
    mu: f64,
    r_max: usize,
    seed: u64,
    opts: &RandomFamilyOptions,
) -> Result<LocalFamily> {
    let lat = model.lattice;
    let torus = lat.torus;
    if r_max < 1 || r_max > torus.side() {
        return Err(Error::invalid(format!("r_max = {r_max} outside 1..={}", torus.side())));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(j >= 0.0) || !(mu > 0.0) {
        return Err(Error::invalid("J must be nonnegative and mu positive"));
    }
    let n = lat.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for r in 1..=r_max {
        for sq in lattice::enumerate_squares(&torus, r)? {
            let q = sorted(lat.qubits_of(&sq));
            let k = q.len();
            let codes: Vec<u64> = if 2 * k < 20 && (1u64 << (2 * k)) - 1 <= opts.max_paulis as u64 {
                (1..1u64 << (2 * k)).collect()
            } else if 2 * k < 40 {
                let total = (1usize << (2 * k)) - 1;
                let mut picked: Vec<u64> = sample(&mut rng, total, opts.max_paulis.min(total))
                    .into_iter()
                    .map(|i| i as u64 + 1)
                    .collect();
                picked.sort_unstable();
                picked
            } else {
                let mut picked = Vec::new();
                while picked.len() < opts.max_paulis {
                    let code: u64 = rng.random::<u64>() & if 2 * k >= 64 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
                    if code != 0 && !picked.contains(&code) {
                        picked.push(code);
                    }
                }
                picked.sort_unstable();
                picked
            };
            let mut op = PauliSum::new(n);
            for code in codes {
                let w: f64 = StandardNormal.sample(&mut rng);
                op.push_real(w, pauli_from_code(n, &q, code))?;
            }
            let raw = local_norm(&op, &q)?;
            let u: f64 = rng.random::<f64>();
            let target = j * (-mu * r as f64).exp() * u;
            let scale = if raw > 0.0 { target / raw } else { 0.0 };
            terms.push(FamilyTerm {
                r,
                square: sq,
                op: op.scaled(Complex64::new(scale, 0.0)),
                norm: target,
            });
        }
    }
    Ok(LocalFamily {
        lattice: lat,
        terms,
        strength_j: j,
        decay: Decay::Exponential { mu },
        r_max,
        seed: Some(seed),
        label: format!("random-J{j}-mu{mu}-r{r_max}-seed{seed}"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// `J e^{-μ r}` fit.
    pub exp_j: f64,
    pub exp_mu: f64,
    pub exp_rms: f64,
    /// `J r^{-α}` fit.
    pub power_j: f64,
    pub power_alpha: f64,
    pub power_rms: f64,
    pub best: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthReport {
    pub j_measured: f64,
    pub max_norm_by_radius: Vec<(usize, f64)>,
    pub first_nonzero_radius: Option<usize>,
    pub fit: Option<EnvelopeFit>,
    pub convention: String,
}

pub const STRENGTH_CONVENTION: &str =
    "Pauli components grouped by their minimal enclosing square; each group is one V_{r,A} with r the square size";

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (icpt, slope, rms)
}

/// Least-squares exponential and power-law envelopes of `(r, norm)` data.
pub fn fit_envelope(data: &[(usize, f64)]) -> Option<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = data.iter().filter(|(_, v)| *v > 1e-14).map(|(r, v)| (*r as f64, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (a, b, rms_e) = line_fit(&xs, &ys);
    let (pa, pb, rms_p) = line_fit(&lx, &ys);
    Some(EnvelopeFit {
        exp_j: a.exp(),
        exp_mu: -b,
        exp_rms: rms_e,
        power_j: pa.exp(),
        power_alpha: -pb,
        power_rms: rms_p,
        best: if rms_e <= rms_p { "exponential".into() } else { "power-law".into() },
    })
}

fn report_from_terms(terms: &[(usize, f64)]) -> StrengthReport {
    let mut by_r: Vec<(usize, f64)> = Vec::new();
    for &(r, v) in terms {
        match by_r.iter_mut().find(|e| e.0 == r) {
            Some(e) => e.1 = e.1.max(v),
            None => by_r.push((r, v)),
        }
    }
    by_r.sort_by_key(|e| e.0);
    let j = by_r.iter().map(|e| e.1).fold(0.0, f64::max);
    StrengthReport {
        j_measured: j,
        first_nonzero_radius: by_r.iter().find(|e| e.1 > 1e-12).map(|e| e.0),
        fit: fit_envelope(&by_r),
        max_norm_by_radius: by_r,
        convention: STRENGTH_CONVENTION.into(),
    }
}

/// Measured strength of a dense operator under the square convention.
pub fn strength_of(v: &CMat, lat: &Lattice) -> Result<StrengthReport> {
    let terms = square_decomposition(v, lat, 1e-14);
    let mut data = Vec::with_capacity(terms.len());
    for t in &terms {
        data.push((t.radius(), local_norm(&t.op, &lat.qubits_of(&t.square))?));
    }
    Ok(report_from_terms(&data))
}

/// Same measurement for an operator given as a Pauli sum.
pub fn strength_of_sum(v: &PauliSum, lat: &Lattice) -> Result<StrengthReport> {
    let terms = square_decomposition_of_sum(v, lat);
    let mut data = Vec::with_capacity(terms.len());
    for t in &terms {
        data.push((t.radius(), local_norm(&t.op, &lat.qubits_of(&t.square))?));
    }
    Ok(report_from_terms(&data))
}

/// Replaces each term `W` by `P' W P' + (I - P') W (I - P')`, where `P'` is
/// the product of `I - Q_A` over the model terms overlapping `W`. The
/// result commutes with every `Q_A`, hence with `P`, and stays local.
pub fn block_diagonal_part(family: &LocalFamily, model: &CommutingProjectorModel) -> Result<LocalFamily> {
    let lat = family.lattice;
    let n = lat.n_qubits();
    let caps = Caps::default();
    let mut out = family.clone();
    out.label = format!("{}-blockdiag", family.label);
    for t in &mut out.terms {
        let w_support = t.op.support();
        let overlapping: Vec<&PauliString> = model
            .terms
            .iter()
            .map(|m| &m.stabilizer)
            .filter(|s| s.support().iter().any(|q| w_support.contains(q)))
            .collect();
        let mut q: Vec<usize> = lat.qubits_of(&t.square);
        for s in &overlapping {
            q.extend(s.support());
        }
        let q = sorted(q);
        if q.len() > caps.dense_qubits {
            return Err(Error::Resource {
                what: "block-diagonal compression qubits".into(),
                needed: q.len(),
                cap: caps.dense_qubits,
            });
        }
        let k = q.len();
        let d = 1usize << k;
        let w = crate::operators::realize_dense(&t.op.restrict(&q)?, &caps)?;
        let mut p = dense::identity(d);
        for s in &overlapping {
            let mut half = PauliSum::new(k);
            half.push_real(0.5, PauliString::identity(k))?;
            half.push_real(0.5, s.restrict(&q))?;
            p = &p * crate::operators::realize_dense(&half, &caps)?;
        }
        let qp = dense::identity(d) - &p;
        let comp = &p * &w * &p + &qp * &w * &qp;
        let local = to_pauli_sum(&comp, 1e-15);
        let op = local.embed(n, &q)?;
        let sites = lat.sites_of_qubits(&q);
        let sq = crate::lattice::enclosing_square(&lat.torus, &sites);
        t.r = sq.size;
        t.square = sq;
        t.norm = dense::spectral_norm(&comp)?;
        t.op = op;
    }
    out.r_max = out.terms.iter().map(|t| t.r).max().unwrap_or(1);
    out.strength_j = out.terms.iter().map(|t| t.norm).fold(0.0, f64::max);
    Ok(out)
}

/// Text form: the model-file term syntax with a trailing weight column.
pub fn write_family(f: &LocalFamily) -> String {
    let lat = &f.lattice;
    let torus: &Torus = &lat.torus;
    let mut out = String::new();
    let _ = writeln!(out, "# family {}", f.label);
    let _ = writeln!(out, "lattice {} {} {}", torus.dim(), torus.side(), lat.qubits_per_site);
    let decay = match &f.decay {
        Decay::Exponential { mu } => format!("exponential {mu}"),
        Decay::SingleRadius { r } => format!("single-radius {r}"),
        Decay::Fitted(fit) => format!("fitted {}", fit.exp_mu),
    };
    let seed = f.seed.map_or("none".to_string(), |s| s.to_string());
    let _ = writeln!(out, "family {} {} {} {} {}", f.label, f.strength_j, decay, f.r_max, seed);
    for (idx, t) in f.terms.iter().enumerate() {
        let anchor = if torus.dim() == 1 {
            format!("{}", t.square.anchor[0])
        } else {
            format!("{},{}", t.square.anchor[0], t.square.anchor[1])
        };
        let q = lat.qubits_of(&t.square);
        for (c, p) in t.op.combined_hermitian() {
            let local = p.restrict(&q);
            let _ = writeln!(out, "term {} {} {} {} {}", anchor, t.square.size, local.body(), c.re, idx);
        }
    }
    out
}

/// Parses [`write_family`] output.
pub fn parse_family(text: &str) -> Result<LocalFamily> {
    let perr = |line: usize, message: String| Error::Parse { line, column: 1, message };
    let mut lat: Option<Lattice> = None;
    let mut fam: Option<LocalFamily> = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            "lattice" if toks.len() == 4 => {
                let v: Vec<usize> = toks[1..].iter().map(|t| t.parse::<usize>()).collect::<std::result::Result<_, _>>().map_err(|e| perr(ln, e.to_string()))?;
                lat = Some(Lattice::new(Torus::new(v[0], v[1])?, v[2])?);
            }
            "family" if toks.len() == 7 => {
                let l = lat.ok_or_else(|| perr(ln, "family before lattice".into()))?;
                let j: f64 = toks[2].parse().map_err(|_| perr(ln, "bad J".into()))?;
                let val: f64 = toks[4].parse().map_err(|_| perr(ln, "bad decay value".into()))?;
                let decay = match toks[3] {
                    "exponential" => Decay::Exponential { mu: val },
                    "single-radius" => Decay::SingleRadius { r: val as usize },
                    "fitted" => Decay::Exponential { mu: val },
                    other => return Err(perr(ln, format!("unknown decay {other}"))),
                };
                let r_max: usize = toks[5].parse().map_err(|_| perr(ln, "bad r_max".into()))?;
                let seed = if toks[6] == "none" { None } else { Some(toks[6].parse().map_err(|_| perr(ln, "bad seed".into()))?) };
                let mut f = LocalFamily::empty(l, toks[1]);
                f.strength_j = j;
                f.decay = decay;
                f.r_max = r_max;
                f.seed = seed;
                fam = Some(f);
            }
            "term" if toks.len() == 6 => {
                let f = fam.as_mut().ok_or_else(|| perr(ln, "term before family header".into()))?;
                let l = f.lattice;
                let coords: Vec<usize> = toks[1].split(',').map(|c| c.parse::<usize>()).collect::<std::result::Result<_, _>>().map_err(|_| perr(ln, "bad anchor".into()))?;
                let mut anchor = [0usize; 2];
                for (k, c) in coords.iter().enumerate().take(2) {
                    anchor[k] = *c;
                }
                let size: usize = toks[2].parse().map_err(|_| perr(ln, "bad size".into()))?;
                let square = Square { anchor, size };
                let q = l.qubits_of(&square);
                let local = PauliString::parse(toks[3])?;
                if local.n_qubits() != q.len() {
                    return Err(perr(ln, "Pauli spec length does not match the square".into()));
                }
                let weight: f64 = toks[4].parse().map_err(|_| perr(ln, "bad weight".into()))?;
                let idx: usize = toks[5].parse().map_err(|_| perr(ln, "bad term index".into()))?;
                let mut ops = Vec::new();
                for (i, &qq) in q.iter().enumerate() {
                    let op = local.get(i);
                    if op != Pauli::I {
                        ops.push((qq, op));
                    }
                }
                let p = PauliString::from_ops(l.n_qubits(), &ops)?.with_phase(Phase::ONE);
                if idx == f.terms.len() {
                    f.terms.push(FamilyTerm { r: size, square, op: PauliSum::new(l.n_qubits()), norm: 0.0 });
                } else if idx + 1 != f.terms.len() {
                    return Err(perr(ln, "term indices must be consecutive".into()));
                }
                f.terms[idx].op.push_real(weight, p)?;
            }
            other => return Err(perr(ln, format!("unexpected line starting with {other:?}"))),
        }
    }
    let mut f = fam.ok_or_else(|| perr(1, "missing family header".into()))?;
    let lat = f.lattice;
    for t in &mut f.terms {
        t.norm = local_norm(&t.op, &lat.qubits_of(&t.square))?;
    }
    Ok(f)
}

pub fn save_family(f: &LocalFamily, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_family(f))?;
    Ok(())
}

pub fn load_family(path: impl AsRef<Path>) -> Result<LocalFamily> {
    parse_family(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_ising, build_toric_code};

    #[test]
    fn field_family() {
        let m = build_toric_code(2).unwrap();
        let f = uniform_field(&m, Pauli::X, 0.05).unwrap();
        assert_eq!(f.terms.len(), 8);
        assert!(f.terms.iter().all(|t| (t.norm - 0.05).abs() < 1e-15));
        assert!(uniform_field(&m, Pauli::X, 1.0).is_err());
    }

    #[test]
    fn random_family_envelope_and_determinism() {
        let m = build_toric_code(2).unwrap();
        let opts = RandomFamilyOptions::default();
        let a = random_family(&m, 0.1, 1.0, 2, 11, &opts).unwrap();
        let b = random_family(&m, 0.1, 1.0, 2, 11, &opts).unwrap();
        assert_eq!(a, b);
        for t in &a.terms {
            assert!(t.norm <= 0.1 * (-(t.r as f64)).exp() + 1e-15);
            let measured = local_norm(&t.op, &m.lattice.qubits_of(&t.square)).unwrap();
            assert!((measured - t.norm).abs() < 1e-10);
            assert!(t.op.is_hermitian(1e-14));
        }
    }

    #[test]
    fn family_text_round_trip() {
        let m = build_ising(3, 1).unwrap();
        let f = random_family(&m, 0.2, 0.5, 2, 3, &RandomFamilyOptions::default()).unwrap();
        let text = write_family(&f);
        let back = parse_family(&text).unwrap();
        assert_eq!(back.terms.len(), f.terms.len());
        let caps = Caps::default();
        let d = crate::operators::realize_dense(&f.total(), &caps).unwrap() - crate::operators::realize_dense(&back.total(), &caps).unwrap();
        assert!(dense::max_abs(&d) < 1e-14);
        assert_eq!(write_family(&back), text);
    }

    #[test]
    fn field_strength() {
        let m = build_ising(3, 2).unwrap();
        let f = uniform_field(&m, Pauli::X, 0.05).unwrap();
        let v = crate::operators::realize_dense(&f.total(), &Caps::default()).unwrap();
        let rep = strength_of(&v, &m.lattice).unwrap();
        assert!((rep.j_measured - 0.05).abs() < 1e-12);
        assert_eq!(rep.max_norm_by_radius.len(), 1);
        assert_eq!(rep.first_nonzero_radius, Some(1));
        // two edge qubits per toric site share one unit square
        let t = build_toric_code(2).unwrap();
        let f = uniform_field(&t, Pauli::X, 0.05).unwrap();
        let v = crate::operators::realize_dense(&f.total(), &Caps::default()).unwrap();
        assert!((strength_of(&v, &t.lattice).unwrap().j_measured - 0.1).abs() < 1e-12);
    }
}
