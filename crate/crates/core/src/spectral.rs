//! Eigensolvers, band clustering, gap tracking and band-containment checks.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CommutingProjectorModel;
use crate::operators::dense::{self, c, CMat};
use crate::operators::krylov::{self, LanczosOptions};
use crate::operators::{realize_dense, Caps, LinearOperator, OperatorMatrix, PauliOperator, PauliSum};
use crate::par::{self, Exec};
use crate::perturb::LocalFamily;

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub max_residual: f64,
}

/// Full Hermitian eigendecomposition with a residual audit.
pub fn dense_spectrum(m: &OperatorMatrix, caps: &Caps) -> Result<DenseSpectrum> {
    if m.n_qubits() > caps.dense_qubits {
        return Err(Error::Resource {
            what: "dense spectrum qubits (use low_spectrum)".into(),
            needed: m.n_qubits(),
            cap: caps.dense_qubits,
        });
    }
    dense_spectrum_of(&m.to_dense())
}

pub fn dense_spectrum_of(a: &CMat) -> Result<DenseSpectrum> {
    let (values, vectors) = dense::eigh(&dense::hermitian_part(a))?;
    let av = a * &vectors;
    let d = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let mut r = 0.0;
        for i in 0..d {
            r += (av[(i, j)] - vectors[(i, j)] * values[j]).norm_sqr();
        }
        worst = worst.max(r.sqrt());
    }
    Ok(DenseSpectrum {
        values,
        vectors,
        max_residual: worst,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowSpectrum {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<num_complex::Complex64>>,
    pub matvecs: usize,
    pub restarts: usize,
    /// Pairs of indices whose values differ by less than 1e-8.
    pub near_degenerate: Vec<(usize, usize)>,
}

/// Lowest `m ≤ 64` eigenvalues by block Lanczos.
pub fn low_spectrum(op: &dyn LinearOperator, m: usize, opts: &LanczosOptions) -> Result<LowSpectrum> {
    if m > 64 {
        return Err(Error::invalid(format!("low_spectrum supports at most 64 eigenvalues, asked {m}")));
    }
    let mut o = opts.clone();
    let p = if o.block == 0 { m.max(2) } else { o.block };
    o.max_basis = o.max_basis.max(m + 3 * p);
    let e = krylov::lowest(op, m, &o)?;
    let near = (1..e.values.len())
        .filter(|&i| (e.values[i] - e.values[i - 1]).abs() < 1e-8)
        .map(|i| (i - 1, i))
        .collect();
    Ok(LowSpectrum {
        values: e.values,
        residuals: e.residuals,
        vectors: e.vectors,
        matvecs: e.matvecs,
        restarts: e.restarts,
        near_degenerate: near,
    })
}

/// Lowest `m` eigenvalues of a Pauli sum, dense when small and matrix-free otherwise.
pub fn lowest_of_sum(h: &PauliSum, m: usize, caps: &Caps, opts: &LanczosOptions) -> Result<Vec<f64>> {
    if h.n_qubits() <= caps.dense_qubits.min(10) {
        let d = realize_dense(h, caps)?;
        let mut v = dense::eigvalsh(&dense::hermitian_part(&d))?;
        v.truncate(m);
        return Ok(v);
    }
    let op = PauliOperator::new(h, caps)?;
    Ok(low_spectrum(&op, m, opts)?.values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBands {
    pub eigenvalues: Vec<f64>,
    pub bands: Vec<Band>,
    pub delta0: f64,
    /// Distance from band 0 to band 1, if a second band was computed.
    pub gap: Option<f64>,
    pub threshold: f64,
}

impl SpectralBands {
    /// Band label of each eigenvalue, in order.
    pub fn labels(&self) -> Vec<usize> {
        self.bands.iter().flat_map(|b| std::iter::repeat_n(b.k, b.count)).collect()
    }
}

/// Greedy clustering: a new band starts after a jump larger than `threshold`.
pub fn cluster_bands(eigs: &[f64], threshold: f64) -> Result<SpectralBands> {
    if eigs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("eigenvalues must be sorted ascending"));
    }
    let mut bands: Vec<Band> = Vec::new();
    for (i, &e) in eigs.iter().enumerate() {
        if i == 0 || e - eigs[i - 1] > threshold {
            bands.push(Band {
                k: bands.len(),
                lo: e,
                hi: e,
                count: 1,
            });
        } else {
            let b = bands.last_mut().expect("band exists");
            b.hi = e;
            b.count += 1;
        }
    }
    let delta0 = bands.first().map_or(0.0, |b| b.hi - b.lo);
    let gap = (bands.len() > 1).then(|| bands[1].lo - bands[0].hi);
    Ok(SpectralBands {
        eigenvalues: eigs.to_vec(),
        bands,
        delta0,
        gap,
        threshold,
    })
}

/// `H_s = H_0 + s V`.
pub fn path_hamiltonian(model: &CommutingProjectorModel, family: &LocalFamily, s: f64) -> PauliSum {
    let mut h = model.hamiltonian();
    h.extend(&family.total().scaled(c(s))).expect("sizes agree");
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPath {
    pub s_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub e_min: Vec<f64>,
    pub e_max: Vec<f64>,
    pub min_gap: f64,
    pub holds_half: bool,
    pub holds_three_quarters: bool,
    pub unperturbed_gap: f64,
}

/// Lowest `g + 1` eigenvalues of `H_0 + sV` along a grid.
pub fn gap_path(
    model: &CommutingProjectorModel,
    family: &LocalFamily,
    s_grid: &[f64],
    caps: &Caps,
    opts: &LanczosOptions,
) -> Result<GapPath> {
    if s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid("s grid must be strictly increasing inside [0, 1]"));
    }
    let g = model.ground_degeneracy;
    let rows: Vec<Result<Vec<f64>>> = par::map_slice(Exec::current(), s_grid, |&s| {
        lowest_of_sum(&path_hamiltonian(model, family, s), g + 1, caps, opts).map_err(|e| match e {
            Error::Numerical { message, residual } => Error::Numerical {
                message: format!("{message} at s = {s}"),
                residual,
            },
            other => other,
        })
    });
    let mut gaps = Vec::new();
    let mut e_min = Vec::new();
    let mut e_max = Vec::new();
    for r in rows {
        let v = r?;
        e_min.push(v[0]);
        e_max.push(v[g - 1]);
        gaps.push(v[g] - v[g - 1]);
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let unperturbed_gap = lowest_of_sum(&model.hamiltonian(), g + 1, caps, opts)?;
    Ok(GapPath {
        s_grid: s_grid.to_vec(),
        holds_half: min_gap >= 0.5,
        holds_three_quarters: min_gap >= 0.75,
        gaps,
        e_min,
        e_max,
        min_gap,
        unperturbed_gap: unperturbed_gap[g] - unperturbed_gap[g - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub value: f64,
    /// Integer level whose interval is closest to covering the value.
    pub k: usize,
    /// Positive when covered.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Verdict {
    pub shift: f64,
    pub j: f64,
    pub c1: f64,
    pub delta: f64,
    pub covered: bool,
    pub margins: Vec<Margin>,
    /// Smallest constants that cover every eigenvalue with the band-to-level map.
    pub fitted_c1: f64,
    pub fitted_delta: f64,
}

const ROUNDOFF: f64 = 1e-10;

/// `I_k = [k(1 - c1 J) - δ, k(1 + c1 J) + δ]` membership for the shifted spectrum.
pub fn theorem1_margins(shifted: &[f64], j: f64, c1: f64, delta: f64) -> Vec<Margin> {
    shifted
        .iter()
        .map(|&e| {
            let k_near = e.round().max(0.0) as usize;
            let lo = k_near.saturating_sub(2);
            let mut best = Margin {
                value: e,
                k: k_near,
                margin: f64::NEG_INFINITY,
            };
            for k in lo..=k_near + 2 {
                let kf = k as f64;
                let spread = if j == 0.0 { 0.0 } else { c1 * j * kf };
                let m = spread + delta - (e - kf).abs();
                if m > best.margin {
                    best = Margin { value: e, k, margin: m };
                }
            }
            best
        })
        .collect()
}

/// Checks band containment for given constants and fits the smallest
/// covering `c1` with `δ` set to the band-0 width.
///
/// The overall energy shift is free; it is chosen in `[E_min, E_max]` of
/// band 0 to minimize the fitted `c1`. `levels` lists the distinct
/// unperturbed levels; band `i` is compared to `levels[i]`, falling back to
/// the nearest level when bands outnumber them.
pub fn check_theorem1(bands: &SpectralBands, levels: &[f64], j: f64, c1: f64, delta: f64) -> Theorem1Verdict {
    let labels = bands.labels();
    let (e_min, e_max) = bands.bands.first().map_or((0.0, 0.0), |b| (b.lo, b.hi));
    let fitted_delta = e_max - e_min;
    let targets: Vec<(f64, f64)> = bands
        .eigenvalues
        .iter()
        .zip(&labels)
        .filter(|(_, &lab)| lab > 0)
        .map(|(&e, &lab)| {
            let k = if lab < levels.len() {
                levels[lab]
            } else {
                *levels
                    .iter()
                    .min_by(|a, b| (*a - (e - e_min)).abs().partial_cmp(&(*b - (e - e_min)).abs()).unwrap())
                    .unwrap_or(&0.0)
            };
            (e, k)
        })
        .collect();
    // Convex and piecewise linear in the shift.
    let c1_at = |shift: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for &(e, k) in &targets {
            // Deviations at rounding level are not evidence of spreading.
            let need = ((e - shift - k).abs() - fitted_delta).max(0.0);
            if need > ROUNDOFF * (1.0 + k) {
                worst = if j > 0.0 && k > 0.0 { worst.max(need / (j * k)) } else { f64::INFINITY };
            }
        }
        worst
    };
    let (mut a, mut b) = (e_min, e_max);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if c1_at(m1) <= c1_at(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mid = 0.5 * (a + b);
    let shift = if c1_at(e_min) <= c1_at(mid) { e_min } else { mid };
    let fitted_c1 = c1_at(shift);
    let shifted: Vec<f64> = bands.eigenvalues.iter().map(|e| e - shift).collect();
    let margins = theorem1_margins(&shifted, j, c1, delta);
    let covered = margins.iter().all(|m| m.margin >= -ROUNDOFF * (1.0 + m.k as f64));
    Theorem1Verdict {
        shift,
        j,
        c1,
        delta,
        covered,
        margins,
        fitted_c1,
        fitted_delta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelBound {
    /// `‖W H_0^+‖`, infinite when `W` does not annihilate `ker H_0`.
    pub b: f64,
    pub kernel_defect: f64,
    /// `None` when the precondition `b < 1` fails.
    pub contained: Option<bool>,
    /// Largest distance of an eigenvalue of `H_0 + W` outside the intervals.
    pub worst_excess: f64,
}

/// Relative bound of `W` with respect to `H_0 ≥ 0` and the interval test
/// `spec(H_0 + W) ⊂ ∪ [λ(1 - b), λ(1 + b)]`.
pub fn check_relbound_containment(h0: &CMat, w: &CMat, margin: f64) -> Result<RelBound> {
    let (lam, u) = dense::eigh(&dense::hermitian_part(h0))?;
    let d = lam.len();
    let scale = lam.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let ker: Vec<usize> = (0..d).filter(|&i| lam[i].abs() <= 1e-9 * scale).collect();
    let rng: Vec<usize> = (0..d).filter(|&i| lam[i].abs() > 1e-9 * scale).collect();
    let uk = Mat::from_fn(d, ker.len(), |i, j| u[(i, ker[j])]);
    let kernel_defect = if ker.is_empty() { 0.0 } else { dense::spectral_norm(&(w * &uk))? };
    let wnorm = dense::spectral_norm(w)?;
    if kernel_defect > 1e-9 * (1.0 + wnorm) {
        return Ok(RelBound {
            b: f64::INFINITY,
            kernel_defect,
            contained: None,
            worst_excess: f64::NAN,
        });
    }
    let ur = Mat::from_fn(d, rng.len(), |i, j| u[(i, rng[j])] * (1.0 / lam[rng[j]]));
    let pinv_cols = w * &ur;
    let b = dense::spectral_norm(&pinv_cols)?;
    if b >= 1.0 {
        return Ok(RelBound {
            b,
            kernel_defect,
            contained: None,
            worst_excess: f64::NAN,
        });
    }
    let mut levels: Vec<f64> = Vec::new();
    for &l in &lam {
        if levels.last().is_none_or(|&p| (l - p).abs() > 1e-9 * scale) {
            levels.push(l);
        }
    }
    let e = dense::eigvalsh(&dense::hermitian_part(&(h0 + w)))?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for &x in &e {
        let excess = levels
            .iter()
            .map(|&l| {
                let (lo, hi) = if l >= 0.0 { (l * (1.0 - b), l * (1.0 + b)) } else { (l * (1.0 + b), l * (1.0 - b)) };
                if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(excess);
    }
    Ok(RelBound {
        b,
        kernel_defect,
        contained: Some(worst <= margin),
        worst_excess: worst,
    })
}

/// A diagonal `H_0` with integer levels in `0..=max_level` (level 0 always
/// present) and a Hermitian `W` with `W ker H_0 = 0`, scaled so that its
/// relative bound is drawn uniformly from `[0.05, 0.95]`.
pub fn random_relbound_instance(dim: usize, max_level: usize, seed: u64) -> Result<(CMat, CMat, f64)> {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    if dim < 2 || max_level == 0 {
        return Err(Error::invalid("need dim >= 2 and max_level >= 1"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<usize> = (0..dim).map(|i| if i == 0 { 0 } else { rng.random_range(0..=max_level) }).collect();
    if levels.iter().all(|&l| l == 0) {
        return random_relbound_instance(dim, max_level, seed.wrapping_add(1));
    }
    let h0 = Mat::from_fn(dim, dim, |i, j| if i == j { c(levels[i] as f64) } else { c(0.0) });
    let mut g = Mat::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        num_complex::Complex64::new(re, im)
    });
    for i in 0..dim {
        for j in 0..dim {
            if levels[i] == 0 || levels[j] == 0 {
                g[(i, j)] = c(0.0);
            }
        }
    }
    let w0 = dense::hermitian_part(&g);
    let b0 = check_relbound_containment(&h0, &w0, 1e-10)?.b;
    let target = rng.random_range(0.05..0.95);
    Ok((h0, &w0 * faer::Scale(c(target / b0)), target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_example() {
        let b = cluster_bands(&[0.0, 0.0, 0.0, 0.0, 2.01, 2.02], 0.5).unwrap();
        assert_eq!(b.bands.len(), 2);
        assert_eq!(b.bands[0].count, 4);
        assert_eq!(b.bands[1].count, 2);
        assert_eq!(b.delta0, 0.0);
        assert!((b.gap.unwrap() - 2.01).abs() < 1e-15);
    }

    #[test]
    fn fabricated_eigenvalue_not_covered() {
        let b = cluster_bands(&[0.0, 1.6], 0.5).unwrap();
        let v = check_theorem1(&b, &[0.0, 1.0, 2.0], 0.01, 0.1, 0.01);
        assert!(!v.covered);
        let u = cluster_bands(&[0.0, 0.0, 2.0], 0.5).unwrap();
        let v = check_theorem1(&u, &[0.0, 2.0], 0.0, 0.0, 0.0);
        assert!(v.covered);
        assert_eq!((v.fitted_c1, v.fitted_delta), (0.0, 0.0));
    }

    #[test]
    fn relbound_scaled_h0() {
        let h0 = Mat::from_fn(4, 4, |i, j| if i == j { c([0.0, 1.0, 1.0, 2.0][i]) } else { c(0.0) });
        let w = &h0 * faer::Scale(c(0.3));
        let r = check_relbound_containment(&h0, &w, 1e-10).unwrap();
        assert!((r.b - 0.3).abs() < 1e-12);
        assert_eq!(r.contained, Some(true));
        assert!(r.worst_excess.abs() < 1e-12);
        let big = &h0 * faer::Scale(c(1.5));
        assert_eq!(check_relbound_containment(&h0, &big, 1e-10).unwrap().contained, None);
        let mut leak = dense::zeros(4);
        leak[(0, 1)] = c(0.1);
        leak[(1, 0)] = c(0.1);
        assert!(check_relbound_containment(&h0, &leak, 1e-10).unwrap().b.is_infinite());
    }
}
