//! Quasi-adiabatic continuation along `H_s = H_0 + sV` and the rewrites that
//! turn the conjugated Hamiltonian into a locally block-diagonal one.
//!
//! Everything here is dense: the generator needs a full eigenbasis of `H_s`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::lattice::{self, box_partition};
use crate::models::CommutingProjectorModel;
use crate::operators::dense::{self, c, CMat};
use crate::operators::locality::{conditional_expectation_qubits, locality_profile_dense, square_decomposition};
use crate::operators::{realize_dense, Caps};
use crate::par::{self, Exec};
use crate::perturb::{strength_of, LocalFamily, StrengthReport};
use crate::spectral::{check_relbound_containment, dense_spectrum_of, DenseSpectrum, RelBound};

/// Dense data of a linear path, shared by every flow operation.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub h0: CMat,
    pub v: CMat,
    /// Ground projector of `H_0`.
    pub p0: CMat,
    pub degeneracy: usize,
}

impl FlowPath {
    pub fn new(model: &CommutingProjectorModel, family: &LocalFamily, caps: &Caps) -> Result<FlowPath> {
        let n = model.n_qubits();
        if n > caps.dense_qubits {
            return Err(Error::Resource {
                what: "dense flow qubits".into(),
                needed: n,
                cap: caps.dense_qubits,
            });
        }
        if family.n_qubits() != n {
            return Err(Error::invalid("family and model act on different qubit counts"));
        }
        let h0 = realize_dense(&model.hamiltonian(), caps)?;
        let v = realize_dense(&family.total(), caps)?;
        let p0 = global_projector(model, caps)?;
        Ok(FlowPath {
            h0,
            v,
            p0,
            degeneracy: model.ground_degeneracy,
        })
    }

    pub fn hamiltonian(&self, s: f64) -> CMat {
        &self.h0 + &self.v * faer::Scale(c(s))
    }

    fn spectrum(&self, s: f64) -> Result<DenseSpectrum> {
        dense_spectrum_of(&self.hamiltonian(s))
    }

    /// Gap above the lowest `g` levels.
    pub fn gap(&self, eig: &DenseSpectrum) -> f64 {
        let g = self.degeneracy;
        eig.values[g] - eig.values[g - 1]
    }

    /// Projector onto the lowest `g` eigenvectors of `H_s`.
    pub fn direct_projector(&self, s: f64) -> Result<CMat> {
        Ok(low_projector(&self.spectrum(s)?, self.degeneracy))
    }
}

fn global_projector(model: &CommutingProjectorModel, caps: &Caps) -> Result<CMat> {
    Ok(crate::models::local_projector(model, &model.torus().full_square(), caps)?.into_dense())
}

fn low_projector(eig: &DenseSpectrum, g: usize) -> CMat {
    let d = eig.values.len();
    let b = faer::Mat::from_fn(d, g, |i, j| eig.vectors[(i, j)]);
    dense::projector_of(&b)
}

/// `D_s` with `i D_s = ∫ F(t) e^{iH_s t} V e^{-iH_s t} dt`, and the gap of `H_s`.
pub fn generator_ds(path: &FlowPath, s: f64, filter: &FilterSpec) -> Result<(CMat, f64)> {
    let eig = path.spectrum(s)?;
    let r = crate::filters::spectral_multiplier(filter, &path.v, &eig)?;
    Ok((&r * faer::Scale(Complex64::new(0.0, -1.0)), path.gap(&eig)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol: f64,
    /// The flow aborts when the gap of `H_s` drops below this.
    pub gap_floor: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    pub reunitarize_above: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tol: 1e-8,
            gap_floor: 0.5,
            initial_step: 0.05,
            max_steps: 5000,
            reunitarize_above: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowState {
    pub s: f64,
    #[serde(skip)]
    pub u: CMat,
    #[serde(skip)]
    pub p0: CMat,
    #[serde(skip)]
    pub tracked_p: CMat,
    pub unitarity_defect: f64,
    pub steps: usize,
    pub rejected: usize,
    pub reunitarizations: usize,
    /// `(s, Δ(s))` at every accepted step, starting with `s = 0`.
    pub gaps: Vec<(f64, f64)>,
    pub min_gap: f64,
    pub tracked_trace: f64,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `∂_s U = i D_s U` from `U_0 = I` to `s_target`.
pub fn evolve_u(path: &FlowPath, s_target: f64, filter: &FilterSpec, opts: &FlowOptions) -> Result<FlowState> {
    if !(0.0..=1.0).contains(&s_target) {
        return Err(Error::invalid(format!("s must lie in [0, 1], got {s_target}")));
    }
    if !(opts.tol > 0.0 && opts.initial_step > 0.0) {
        return Err(Error::invalid("tolerance and initial step must be positive"));
    }
    let d = path.h0.nrows();
    let i_unit = Complex64::new(0.0, 1.0);
    let rhs = |s: f64, u: &CMat| -> Result<(CMat, f64)> {
        let (ds, gap) = generator_ds(path, s, filter)?;
        if gap < opts.gap_floor {
            return Err(Error::GapCollapse {
                s,
                gap,
                floor: opts.gap_floor,
            });
        }
        Ok((&ds * u * faer::Scale(i_unit), gap))
    };
    let mut u = dense::identity(d);
    let mut s = 0.0;
    let (mut k1, g0) = rhs(0.0, &u)?;
    let mut gaps = vec![(0.0, g0)];
    let mut h = opts.initial_step.min(s_target);
    let (mut steps, mut rejected, mut reun) = (0usize, 0usize, 0usize);
    while s < s_target {
        if steps + rejected >= opts.max_steps {
            return Err(Error::numerical(format!("flow exceeded {} steps at s = {s}", opts.max_steps), f64::NAN));
        }
        h = h.min(s_target - s);
        let mut k: Vec<CMat> = vec![k1.clone()];
        let mut last_gap = 0.0;
        for stage in 1..7 {
            let mut y = u.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    y += kj * faer::Scale(c(h * a));
                }
            }
            let (ks, gap) = rhs(s + C[stage] * h, &y)?;
            last_gap = gap;
            k.push(ks);
        }
        let mut next = u.clone();
        let mut err = dense::zeros(d);
        for j in 0..7 {
            if B5[j] != 0.0 {
                next += &k[j] * faer::Scale(c(h * B5[j]));
            }
            err += &k[j] * faer::Scale(c(h * (B5[j] - B4[j])));
        }
        let e = dense::max_abs(&err);
        if e <= opts.tol || h < 1e-12 {
            s = if s_target - (s + h) < 1e-15 { s_target } else { s + h };
            u = next;
            if dense::unitarity_defect(&u) > opts.reunitarize_above {
                u = dense::polar(&u)?;
                reun += 1;
                k1 = rhs(s, &u)?.0;
            } else {
                k1 = k.swap_remove(6);
            }
            gaps.push((s, last_gap));
            steps += 1;
        } else {
            rejected += 1;
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * (opts.tol / e).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    let tracked = dense::from_basis(&u, &path.p0);
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    Ok(FlowState {
        s,
        unitarity_defect: dense::unitarity_defect(&u),
        tracked_trace: dense::trace(&tracked).re,
        u,
        p0: path.p0.clone(),
        tracked_p: tracked,
        steps,
        rejected,
        reunitarizations: reun,
        gaps,
        min_gap,
    })
}

/// `‖P_direct(s) - U_s P(0) U_s^†‖`.
pub fn check_samespace(flow: &FlowState, path: &FlowPath) -> Result<f64> {
    let direct = path.direct_projector(flow.s)?;
    dense::spectral_norm(&(&direct - &flow.tracked_p))
}

#[derive(Debug, Clone, Serialize)]
pub struct Conjugated {
    #[serde(skip)]
    pub h_prime: CMat,
    #[serde(skip)]
    pub v_prime: CMat,
    /// `‖[U^† H_s U, P]‖` with the integrated `U`.
    pub commutator_raw: f64,
    /// The same after snapping `U` onto an exact intertwiner, if requested.
    pub commutator: f64,
    /// `‖U_snapped - U‖`.
    pub snap_shift: f64,
    pub snapped: bool,
    pub spectrum_defect: f64,
    pub strength: StrengthReport,
}

/// `H_s' = U_s^† H_s U_s` and `V' = H_s' - H_0`.
///
/// With `snap`, `U` is replaced by the polar factor of
/// `P(s) U P(0) + (1 - P(s)) U (1 - P(0))`, which maps `P(0)` onto the
/// directly computed `P(s)` exactly and differs from `U` by the flow error.
pub fn conjugated_hamiltonian(
    flow: &FlowState,
    path: &FlowPath,
    model: &CommutingProjectorModel,
    snap: bool,
) -> Result<Conjugated> {
    let hs = path.hamiltonian(flow.s);
    let p = &path.p0;
    let raw = dense::to_basis(&flow.u, &hs);
    let commutator_raw = dense::spectral_norm(&dense::commutator(&raw, p))?;
    let (h_prime, snap_shift) = if snap {
        let ps = path.direct_projector(flow.s)?;
        let d = hs.nrows();
        let id = dense::identity(d);
        let t = &ps * &flow.u * p + (&id - &ps) * &flow.u * (&id - p);
        let w = dense::polar(&t)?;
        let shift = dense::spectral_norm(&(&w - &flow.u))?;
        (dense::hermitian_part(&dense::to_basis(&w, &hs)), shift)
    } else {
        (dense::hermitian_part(&raw), 0.0)
    };
    let commutator = dense::spectral_norm(&dense::commutator(&h_prime, p))?;
    let a = dense::eigvalsh(&h_prime)?;
    let b = dense::eigvalsh(&dense::hermitian_part(&hs))?;
    let spectrum_defect = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let v_prime = &h_prime - &path.h0;
    let strength = strength_of(&v_prime, &model.lattice)?;
    Ok(Conjugated {
        h_prime,
        v_prime,
        commutator_raw,
        commutator,
        snap_shift,
        snapped: snap,
        spectrum_defect,
        strength,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SiteRewrite {
    pub site: usize,
    #[serde(skip)]
    pub x: CMat,
    pub norm: f64,
    pub commutator_with_p: f64,
    /// Shell norms of `X_u` around `u`.
    pub profile: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalRewrite {
    pub sites: Vec<SiteRewrite>,
    /// `‖Σ Q̃_A + Σ Ṽ_u - H_s'‖`.
    pub telescoping_error: f64,
    /// `‖H_0 + Σ X_u - H_s'‖`.
    pub reconstruction_error: f64,
    pub max_commutator: f64,
    /// Norm of the residual `H_s' - H_0 - Σ X_u` kept as a separate operator.
    pub delta_norm: f64,
}

/// Writes `H_s' = H_0 + Σ_u X_u` with `[X_u, P] = 0`.
///
/// `V'` is split by the canonical square decomposition and each square term
/// is attributed to its anchor site; each model term `Q_A` is attributed to
/// the anchor of its square too.
pub fn rewrite_global_to_local(
    h_prime: &CMat,
    model: &CommutingProjectorModel,
    p: &CMat,
    filter_g: &FilterSpec,
    caps: &Caps,
) -> Result<LocalRewrite> {
    let lat = &model.lattice;
    let h0 = realize_dense(&model.hamiltonian(), caps)?;
    let v_prime = h_prime - &h0;
    let eig = dense_spectrum_of(h_prime)?;
    let sites = lat.torus.site_count();
    let mut v_by_site: BTreeMap<usize, CMat> = BTreeMap::new();
    for t in square_decomposition(&v_prime, lat, 0.0) {
        let m = realize_dense(&t.op, caps)?;
        let e = v_by_site.entry(t.site(lat)).or_insert_with(|| dense::zeros(h0.nrows()));
        *e += &m;
    }
    let q: Vec<(usize, CMat)> = model
        .terms
        .iter()
        .map(|t| Ok((lat.torus.index(t.square.anchor), realize_dense(&t.projector(), caps)?)))
        .collect::<Result<_>>()?;
    let q_tilde: Vec<Result<CMat>> = par::map_slice(Exec::current(), &q, |(_, qa)| crate::filters::spectral_multiplier(filter_g, qa, &eig));
    let q_tilde: Vec<CMat> = q_tilde.into_iter().collect::<Result<_>>()?;
    let d = h0.nrows();
    let mut telescope = dense::zeros(d);
    let per_site: Vec<Result<SiteRewrite>> = par::map_range(Exec::current(), sites, |u| {
        let mut x = match v_by_site.get(&u) {
            Some(vu) => crate::filters::spectral_multiplier(filter_g, vu, &eig)?,
            None => dense::zeros(d),
        };
        for ((site, qa), qt) in q.iter().zip(&q_tilde) {
            if *site == u {
                x += qt - qa;
            }
        }
        let commutator_with_p = dense::spectral_norm(&dense::commutator(&x, p))?;
        let profile = locality_profile_dense(&x, lat, u)?.norms_by_radius;
        Ok(SiteRewrite {
            site: u,
            norm: dense::spectral_norm(&x)?,
            x,
            commutator_with_p,
            profile,
        })
    });
    let per_site: Vec<SiteRewrite> = per_site.into_iter().collect::<Result<_>>()?;
    for qt in &q_tilde {
        telescope += qt;
    }
    for vu in v_by_site.values() {
        telescope += crate::filters::spectral_multiplier(filter_g, vu, &eig)?;
    }
    let telescoping_error = dense::spectral_norm(&(&telescope - h_prime))?;
    let mut recon = h0.clone();
    for s in &per_site {
        recon += &s.x;
    }
    let residual = h_prime - &recon;
    let reconstruction_error = dense::spectral_norm(&residual)?;
    let max_commutator = per_site.iter().map(|s| s.commutator_with_p).fold(0.0, f64::max);
    Ok(LocalRewrite {
        sites: per_site,
        telescoping_error,
        reconstruction_error,
        max_commutator,
        delta_norm: reconstruction_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionAudit {
    /// `‖Σ_m E_m - I‖`.
    pub resolution: f64,
    /// `max ‖E_m E_n - δ_mn E_m‖`.
    pub orthogonality: f64,
    pub hermiticity: f64,
    /// `max(‖T P‖, ‖P T‖)` over all `Y(j)`, `Z(q)`.
    pub annihilation: f64,
    /// `‖Σ Y + Σ Z - (X - shifts - Δ)‖`.
    pub reconstruction: f64,
    /// Largest part of a term outside its square `B_{j+1}` or `B_{q+1}`.
    pub support: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalDecomposition {
    pub site: usize,
    /// Number `M` of nested supports; `B_M` is the whole lattice.
    pub shells: usize,
    /// `(r, c_r)`: scalars removed from `X(r)`.
    pub shifts: Vec<(usize, f64)>,
    /// `(r, ‖P X(r) P - c_r P‖)` before shifting.
    pub tqo1_defects: Vec<(usize, f64)>,
    #[serde(skip)]
    pub delta: CMat,
    pub delta_norm: f64,
    #[serde(skip)]
    pub y_terms: Vec<(usize, CMat)>,
    #[serde(skip)]
    pub z_terms: Vec<(usize, CMat)>,
    pub y_norms: Vec<(usize, f64)>,
    pub z_norms: Vec<(usize, f64)>,
    pub audit: DecompositionAudit,
    pub warnings: Vec<String>,
}

impl LocalDecomposition {
    /// Every `Y(j)` and `Z(q)` tagged with the index `r` of its support `B_r`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &CMat)> {
        self.y_terms.iter().map(|(j, m)| (j + 1, m)).chain(self.z_terms.iter().map(|(q, m)| (q + 1, m)))
    }

    pub fn total_shift(&self) -> f64 {
        self.shifts.iter().map(|s| s.1).sum()
    }
}

/// Splits `X` (commuting with `P`) into terms that annihilate `P`, supported
/// on the nested squares `B_r = b_{r-1}(u)`.
///
/// Shells are `X(r) = E_{B_r}[X] - E_{B_{r-1}}[X]`. For `r ≤ shift_upto`
/// the scalar `tr(P X(r) P)/g` is removed; `Δ = P X P` of what remains is
/// split off and charged to the outermost shell.
pub fn decompose_local(
    x: &CMat,
    model: &CommutingProjectorModel,
    u: usize,
    shift_upto: usize,
    caps: &Caps,
) -> Result<LocalDecomposition> {
    let lat = &model.lattice;
    let torus = &lat.torus;
    let n = lat.n_qubits();
    let d = x.nrows();
    if d != 1usize << n {
        return Err(Error::invalid("operator dimension does not match the model"));
    }
    if u >= torus.site_count() {
        return Err(Error::invalid(format!("site {u} outside the lattice")));
    }
    let id = dense::identity(d);
    let p = global_projector(model, caps)?;
    let g = model.ground_degeneracy as f64;
    let mut supports = Vec::new();
    let mut shells: Vec<CMat> = Vec::new();
    let mut prev: Option<CMat> = None;
    for l in 0.. {
        let b = lattice::site_ball(torus, u, l).square;
        let e = conditional_expectation_qubits(x, n, &lat.qubits_of(&b))?;
        shells.push(match &prev {
            Some(pv) => &e - pv,
            None => e.clone(),
        });
        supports.push(b);
        if b.covers_lattice(torus) {
            break;
        }
        prev = Some(e);
    }
    let m = shells.len();
    let mut shifts = Vec::new();
    let mut defects = Vec::new();
    let mut warnings = Vec::new();
    for (i, xr) in shells.iter_mut().enumerate() {
        let r = i + 1;
        let pxp = &p * &*xr * &p;
        let cr = dense::trace(&pxp).re / g;
        let defect = dense::spectral_norm(&(&pxp - &p * faer::Scale(c(cr))))?;
        defects.push((r, defect));
        if r <= shift_upto {
            if defect > 1e-9 {
                warnings.push(format!("shell {r}: P X(r) P is not proportional to P (defect {defect:.3e})"));
            }
            *xr -= &id * faer::Scale(c(cr));
            shifts.push((r, cr));
        }
    }
    let mut shifted = dense::zeros(d);
    for xr in &shells {
        shifted += xr;
    }
    let delta = &p * &shifted * &p;
    let target = &shifted - &delta;
    shells[m - 1] -= &delta;

    // E_1 = Q_{B_1}, E_k = Q_{B_k} P_{B_{k-1}}, E_{M+1} = P.
    let pb: Vec<CMat> = supports
        .iter()
        .map(|b| Ok(crate::models::local_projector(model, b, caps)?.into_dense()))
        .collect::<Result<_>>()?;
    let mut e_ops: Vec<CMat> = Vec::with_capacity(m + 1);
    for k in 0..m {
        let q = &id - &pb[k];
        e_ops.push(if k == 0 { q } else { &q * &pb[k - 1] });
    }
    e_ops.push(p.clone());
    let mut total = dense::zeros(d);
    for e in &e_ops {
        total += e;
    }
    let resolution = dense::max_abs(&(&total - &id));
    let mut orthogonality: f64 = 0.0;
    for (a, ea) in e_ops.iter().enumerate() {
        for (b, eb) in e_ops.iter().enumerate() {
            let prod = ea * eb;
            let dev = if a == b { dense::max_abs(&(&prod - ea)) } else { dense::max_abs(&prod) };
            orthogonality = orthogonality.max(dev);
        }
    }

    // Indices below are 1-based as in the construction: E_p with p ≤ M.
    let ep = |k: usize| &e_ops[k - 1];
    let xq = |k: usize| &shells[k - 1];
    let mut y_terms = Vec::new();
    for j in 2..=2 * m {
        let mut y = dense::zeros(d);
        let mut any = false;
        for pp in 1..=m {
            if j <= pp || j - pp > m {
                continue;
            }
            let rr = j - pp;
            let top = pp.max(rr);
            if top < 3 {
                continue;
            }
            let mut inner = dense::zeros(d);
            for q in 1..=top - 2 {
                inner += xq(q);
            }
            y += ep(pp) * &inner * ep(rr);
            any = true;
        }
        if any {
            y_terms.push((j, y));
        }
    }
    let mut z_terms = Vec::new();
    for q in 1..=m {
        let hi = (q + 1).min(m);
        let mut left = dense::zeros(d);
        for pp in 1..=hi {
            left += ep(pp);
        }
        z_terms.push((q, &left * xq(q) * &left));
    }

    let mut recon = dense::zeros(d);
    let mut hermiticity: f64 = 0.0;
    let mut annihilation: f64 = 0.0;
    let mut support: f64 = 0.0;
    for (r, t) in y_terms.iter().map(|(j, t)| (j + 1, t)).chain(z_terms.iter().map(|(q, t)| (q + 1, t))) {
        recon += t;
        hermiticity = hermiticity.max(crate::operators::matrix::hermiticity_defect(t));
        annihilation = annihilation.max(dense::max_abs(&(t * &p)).max(dense::max_abs(&(&p * t))));
        let b = &supports[(r - 1).min(m - 1)];
        let local = conditional_expectation_qubits(t, n, &lat.qubits_of(b))?;
        support = support.max(dense::max_abs(&(t - &local)));
    }
    let reconstruction = dense::spectral_norm(&(&recon - &target))?;
    let norms = |v: &[(usize, CMat)]| -> Result<Vec<(usize, f64)>> { v.iter().map(|(k, t)| Ok((*k, dense::spectral_norm(t)?))).collect() };
    Ok(LocalDecomposition {
        site: u,
        shells: m,
        shifts,
        tqo1_defects: defects,
        delta_norm: dense::spectral_norm(&delta)?,
        delta,
        y_norms: norms(&y_terms)?,
        z_norms: norms(&z_terms)?,
        y_terms,
        z_terms,
        audit: DecompositionAudit {
            resolution,
            orthogonality,
            hermiticity,
            annihilation,
            reconstruction,
            support,
        },
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCheck {
    pub box_size: usize,
    pub boxes: usize,
    /// `‖Σ_Y R_Y - I‖`.
    pub resolution: f64,
    /// Smallest eigenvalue of `H_0² - G`; nonnegative when `G ≤ H_0²`.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelboundReport {
    pub per_radius: Vec<(usize, f64)>,
    /// `Σ_r b(r)`.
    pub total_b: f64,
    /// Relative bound and interval test for the full sum.
    pub combined: RelBound,
    pub annihilation: f64,
    pub box_checks: Vec<BoxCheck>,
}

/// Relative bounds of `W(r) = Σ_A V_{r,A}` with respect to `H_0`.
pub fn relbound_of_terms(terms: &[(usize, CMat)], model: &CommutingProjectorModel, caps: &Caps) -> Result<RelboundReport> {
    let h0 = realize_dense(&model.hamiltonian(), caps)?;
    let d = h0.nrows();
    let p = global_projector(model, caps)?;
    let mut annihilation: f64 = 0.0;
    let mut by_r: BTreeMap<usize, CMat> = BTreeMap::new();
    for (k, (r, t)) in terms.iter().enumerate() {
        if t.nrows() != d {
            return Err(Error::invalid(format!("term {k} has the wrong dimension")));
        }
        let a = dense::max_abs(&(t * &p)).max(dense::max_abs(&(&p * t)));
        if a > 1e-8 {
            return Err(Error::Audit {
                what: "relative bound".into(),
                failed: vec![format!("term {k} does not annihilate P ({a:.3e})")],
            });
        }
        annihilation = annihilation.max(a);
        *by_r.entry(*r).or_insert_with(|| dense::zeros(d)) += t;
    }
    let mut per_radius = Vec::new();
    let mut total = dense::zeros(d);
    for (r, w) in &by_r {
        per_radius.push((*r, check_relbound_containment(&h0, w, 1e-10)?.b));
        total += w;
    }
    let total_b = per_radius.iter().map(|x| x.1).sum();
    let combined = check_relbound_containment(&h0, &total, 1e-10)?;
    let mut box_checks = Vec::new();
    let l = model.torus().side();
    for r in 2..=l.max(2) {
        if let Some(bc) = box_check(model, &h0, r, caps)? {
            box_checks.push(bc);
        }
    }
    Ok(RelboundReport {
        per_radius,
        total_b,
        combined,
        annihilation,
        box_checks,
    })
}

pub fn relbound_of_family(family: &LocalFamily, model: &CommutingProjectorModel, caps: &Caps) -> Result<RelboundReport> {
    let terms: Vec<(usize, CMat)> = family
        .terms
        .iter()
        .map(|t| Ok((t.r, realize_dense(&t.op, caps)?)))
        .collect::<Result<_>>()?;
    relbound_of_terms(&terms, model, caps)
}

/// Builds `R_Y = Π_a [Y_a Q_{B_a} + (1 - Y_a) P_{B_a}]` for the box
/// partition of side `r` and tests `G = Σ_Y |Y|² R_Y ≤ H_0²`.
fn box_check(model: &CommutingProjectorModel, h0: &CMat, r: usize, caps: &Caps) -> Result<Option<BoxCheck>> {
    let torus = model.torus();
    let part = box_partition(torus, r)?;
    let nb = part.boxes.len();
    if nb > 10 {
        return Ok(None);
    }
    let d = h0.nrows();
    let id = dense::identity(d);
    let mut pb: Vec<CMat> = vec![id.clone(); nb];
    for t in &model.terms {
        let b = part.box_of(torus, &t.square);
        let qa = realize_dense(&t.projector(), caps)?;
        pb[b] = &pb[b] * (&id - &qa);
    }
    let mut sum = dense::zeros(d);
    let mut g = dense::zeros(d);
    for y in 0u32..(1u32 << nb) {
        let mut ry = id.clone();
        for (a, pa) in pb.iter().enumerate() {
            ry = if y >> a & 1 == 1 { &ry * (&id - pa) } else { &ry * pa };
        }
        let k = y.count_ones() as f64;
        g += &ry * faer::Scale(c(k * k));
        sum += &ry;
    }
    let diff = h0 * h0 - &g;
    let min_eigenvalue = dense::eigvalsh(&dense::hermitian_part(&diff))?.first().copied().unwrap_or(0.0);
    Ok(Some(BoxCheck {
        box_size: r,
        boxes: nb,
        resolution: dense::max_abs(&(&sum - &id)),
        min_eigenvalue,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub s: f64,
    pub flow_steps: usize,
    pub unitarity_defect: f64,
    pub min_gap: f64,
    pub samespace_deviation: f64,
    pub commutator_raw: f64,
    pub commutator: f64,
    pub spectrum_defect: f64,
    pub v_prime_strength: f64,
    pub rewrite: LocalRewrite,
    pub decompositions: Vec<LocalDecomposition>,
    /// `‖H_0 + Σ_u (Σ terms + shifts + Δ_u) + Δ - H_s'‖`.
    pub end_to_end_error: f64,
    pub max_annihilation: f64,
    pub max_resolution: f64,
    pub relbound: RelboundReport,
}

/// Flow, conjugation, rewrite and decomposition in one pass.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    model: &CommutingProjectorModel,
    family: &LocalFamily,
    s: f64,
    filter_f: &FilterSpec,
    filter_g: &FilterSpec,
    shift_upto: usize,
    opts: &FlowOptions,
    caps: &Caps,
) -> Result<PipelineReport> {
    let path = FlowPath::new(model, family, caps)?;
    let flow = evolve_u(&path, s, filter_f, opts)?;
    let samespace = check_samespace(&flow, &path)?;
    let conj = conjugated_hamiltonian(&flow, &path, model, true)?;
    let rewrite = rewrite_global_to_local(&conj.h_prime, model, &path.p0, filter_g, caps)?;
    let decs: Vec<Result<LocalDecomposition>> =
        par::map_slice(Exec::current(), &rewrite.sites, |sr| decompose_local(&sr.x, model, sr.site, shift_upto, caps));
    let decs: Vec<LocalDecomposition> = decs.into_iter().collect::<Result<_>>()?;
    let d = path.h0.nrows();
    let id = dense::identity(d);
    let mut recon = path.h0.clone();
    let mut v2: Vec<(usize, CMat)> = Vec::new();
    for dec in &decs {
        for (r, t) in dec.terms() {
            recon += t;
            v2.push((r, t.clone()));
        }
        recon += &id * faer::Scale(c(dec.total_shift()));
        recon += &dec.delta;
    }
    let h_prime = &conj.h_prime;
    let global_delta = h_prime - &(&path.h0 + &rewrite.sites.iter().fold(dense::zeros(d), |acc, s| acc + &s.x));
    recon += &global_delta;
    let end_to_end_error = dense::spectral_norm(&(&recon - h_prime))?;
    let relbound = relbound_of_terms(&v2, model, caps)?;
    Ok(PipelineReport {
        s: flow.s,
        flow_steps: flow.steps,
        unitarity_defect: flow.unitarity_defect,
        min_gap: flow.min_gap,
        samespace_deviation: samespace,
        commutator_raw: conj.commutator_raw,
        commutator: conj.commutator,
        spectrum_defect: conj.spectrum_defect,
        v_prime_strength: conj.strength.j_measured,
        max_annihilation: decs.iter().map(|d| d.audit.annihilation).fold(0.0, f64::max),
        max_resolution: decs.iter().map(|d| d.audit.resolution).fold(0.0, f64::max),
        rewrite,
        decompositions: decs,
        end_to_end_error,
        relbound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{build_F, DEFAULT_CUTOFF, DEFAULT_SHARPNESS};
    use crate::models::build_toric_code;

    #[test]
    fn zero_family_is_static() {
        let m = build_toric_code(2).unwrap();
        let fam = LocalFamily::empty(m.lattice, "zero");
        let caps = Caps::default();
        let path = FlowPath::new(&m, &fam, &caps).unwrap();
        let f = build_F(DEFAULT_CUTOFF, DEFAULT_SHARPNESS).unwrap();
        let (ds, gap) = generator_ds(&path, 0.3, &f).unwrap();
        assert_eq!(dense::max_abs(&ds), 0.0);
        assert!((gap - 2.0).abs() < 1e-12);
        let st = evolve_u(&path, 1.0, &f, &FlowOptions::default()).unwrap();
        assert!(dense::max_abs(&(&st.u - dense::identity(256))) < 1e-14);
        let st0 = evolve_u(&path, 0.0, &f, &FlowOptions::default()).unwrap();
        assert_eq!(st0.steps, 0);
        assert!(check_samespace(&st0, &path).unwrap() < 1e-12);
    }

    #[test]
    fn single_projector_decomposes_exactly() {
        let m = build_toric_code(2).unwrap();
        let caps = Caps::default();
        let p = global_projector(&m, &caps).unwrap();
        let q = realize_dense(&m.terms[0].projector(), &caps).unwrap();
        let x = &q - &p * &q * &p;
        let u = m.lattice.torus.index(m.terms[0].square.anchor);
        let dec = decompose_local(&x, &m, u, 0, &caps).unwrap();
        assert!(dec.audit.reconstruction < 1e-12);
        assert!(dec.audit.resolution < 1e-12);
        assert!(dec.audit.annihilation < 1e-12);
        assert!(dec.delta_norm < 1e-12);
        let zero = decompose_local(&dense::zeros(256), &m, 0, 0, &caps).unwrap();
        assert!(zero.terms().all(|(_, t)| dense::max_abs(t) == 0.0));
    }
}
