//! Scenario files: TOML with one table per concern.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tqolab_core::filters::{DEFAULT_CUTOFF, DEFAULT_SHARPNESS};
use tqolab_core::flow::FlowOptions;
use tqolab_core::models::{build_ising, build_toric_code, load_model, CommutingProjectorModel};
use tqolab_core::operators::krylov::LanczosOptions;
use tqolab_core::operators::{Caps, Pauli};
use tqolab_core::perturb::{block_diagonal_part, load_family, random_family, uniform_field, LocalFamily, RandomFamilyOptions};
use tqolab_core::tqo::TqoOptions;

use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    GapPath,
    TqoAudit,
    FlowAudit,
    Theorem1Sweep,
    LemmaSuite,
    InstabilityContrast,
    RelboundSuite,
    FilterCheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::GapPath => "gap-path",
            Kind::TqoAudit => "tqo-audit",
            Kind::FlowAudit => "flow-audit",
            Kind::Theorem1Sweep => "theorem1-sweep",
            Kind::LemmaSuite => "lemma-suite",
            Kind::InstabilityContrast => "instability-contrast",
            Kind::RelboundSuite => "relbound-suite",
            Kind::FilterCheck => "filter-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub path: PathSettings,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub relbound: RelboundSettings,
    #[serde(default)]
    pub outputs: OutputSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: Kind,
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `toric-code` or `ising`.
    pub builtin: Option<String>,
    #[serde(rename = "L")]
    pub side: Option<usize>,
    /// Lattice dimension for `ising`.
    pub dim: Option<usize>,
    pub file: Option<PathBuf>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            builtin: Some("toric-code".into()),
            side: Some(2),
            dim: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    #[default]
    None,
    Field,
    Random,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub kind: PerturbationKind,
    #[serde(default = "default_axis")]
    pub axis: String,
    #[serde(default)]
    pub h: f64,
    #[serde(default, rename = "J")]
    pub j: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_rmax")]
    pub r_max: usize,
    /// Falls back to the experiment seed.
    pub seed: Option<u64>,
    pub file: Option<PathBuf>,
    /// Replace the family by its locally block-diagonal compression.
    #[serde(default)]
    pub compress: bool,
}

fn default_axis() -> String {
    "X".into()
}
fn default_mu() -> f64 {
    1.0
}
fn default_rmax() -> usize {
    2
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::None,
            axis: default_axis(),
            h: 0.0,
            j: 0.0,
            mu: default_mu(),
            r_max: default_rmax(),
            seed: None,
            file: None,
            compress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub dense_qubits: usize,
    pub sparse_qubits: usize,
    /// Eigenvalues requested from the iterative solver; defaults to one
    /// more than the ground degeneracy.
    pub eigenvalues: Option<usize>,
    pub lanczos_tol: f64,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub band_threshold: f64,
    pub tqo_tol: f64,
    pub tqo_samples: usize,
    /// Constants tested for band containment; the fitted ones are always reported.
    pub c1: Option<f64>,
    pub delta: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let caps = Caps::default();
        let l = LanczosOptions::default();
        SolverSettings {
            dense_qubits: caps.dense_qubits,
            sparse_qubits: caps.sparse_qubits,
            eigenvalues: None,
            lanczos_tol: l.tol,
            max_basis: l.max_basis,
            max_restarts: l.max_restarts,
            band_threshold: 0.5,
            tqo_tol: TqoOptions::default().tol,
            tqo_samples: TqoOptions::default().samples,
            c1: None,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSettings {
    pub s_grid: Option<Vec<f64>>,
    /// Uniform grid size when `s_grid` is absent.
    pub points: usize,
}

impl Default for PathSettings {
    fn default() -> Self {
        PathSettings { s_grid: None, points: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub s: f64,
    pub tol: f64,
    pub gap_floor: f64,
    pub cutoff: f64,
    pub sharpness: f64,
    pub snap: bool,
}

impl Default for FlowSettings {
    fn default() -> Self {
        let f = FlowOptions::default();
        FlowSettings {
            s: 1.0,
            tol: f.tol,
            gap_floor: f.gap_floor,
            cutoff: DEFAULT_CUTOFF,
            sharpness: DEFAULT_SHARPNESS,
            snap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub h: Vec<f64>,
    #[serde(rename = "L")]
    pub sides: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelboundSettings {
    pub instances: usize,
    pub dim: usize,
    pub max_level: usize,
}

impl Default for RelboundSettings {
    fn default() -> Self {
        RelboundSettings {
            instances: 50,
            dim: 64,
            max_level: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, AppError> {
        let s: Scenario = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Scenario, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Scenario::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut s.model.file);
        fix(&mut s.perturbation.file);
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |field: &str, msg: &str| Err(AppError::Config(format!("{field}: {msg}")));
        match (&self.model.builtin, &self.model.file) {
            (Some(_), Some(_)) => return bad("model", "give either `builtin` or `file`, not both"),
            (None, None) => return bad("model", "one of `builtin` or `file` is required"),
            (Some(b), None) if b != "toric-code" && b != "ising" => {
                return bad("model.builtin", "expected \"toric-code\" or \"ising\"");
            }
            _ => {}
        }
        if self.model.builtin.is_some() && self.model.side.is_none() && self.sweep.sides.is_empty() {
            return bad("model.L", "required for builtin models");
        }
        if self.model.builtin.as_deref() == Some("ising") && !matches!(self.model.dim, None | Some(1) | Some(2)) {
            return bad("model.dim", "must be 1 or 2");
        }
        if parse_axis(&self.perturbation.axis).is_none() {
            return bad("perturbation.axis", "expected X, Y or Z");
        }
        if self.perturbation.kind == PerturbationKind::File && self.perturbation.file.is_none() {
            return bad("perturbation.file", "required when kind = \"file\"");
        }
        if !self.perturbation.h.is_finite() || self.perturbation.h.abs() >= 1.0 {
            return bad("perturbation.h", "must satisfy |h| < 1");
        }
        if let Some(g) = &self.path.s_grid {
            if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return bad("path.s_grid", "must be non-empty, strictly increasing, inside [0, 1]");
            }
        } else if self.path.points < 2 {
            return bad("path.points", "must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.flow.s) {
            return bad("flow.s", "must lie in [0, 1]");
        }
        if self.flow.tol <= 0.0 || self.flow.cutoff <= 0.0 || self.flow.sharpness <= 0.0 {
            return bad("flow", "tol, cutoff and sharpness must be positive");
        }
        if self.solver.eigenvalues.is_some_and(|k| k == 0 || k > 64) {
            return bad("solver.eigenvalues", "must be in 1..=64");
        }
        if self.solver.band_threshold <= 0.0 {
            return bad("solver.band_threshold", "must be positive");
        }
        if self.experiment.kind == Kind::Theorem1Sweep && (self.sweep.h.is_empty() || self.model.builtin.is_none()) {
            return bad("sweep", "theorem1-sweep needs `sweep.h` and a builtin model");
        }
        if self.sweep.h.iter().any(|h| !h.is_finite() || h.abs() >= 1.0) {
            return bad("sweep.h", "every value must satisfy |h| < 1");
        }
        if self.relbound.dim < 2 || self.relbound.dim > 256 {
            return bad("relbound.dim", "must be in 2..=256");
        }
        if self.relbound.max_level == 0 {
            return bad("relbound.max_level", "must be positive");
        }
        Ok(())
    }

    pub fn caps(&self) -> Caps {
        Caps {
            dense_qubits: self.solver.dense_qubits,
            sparse_qubits: self.solver.sparse_qubits,
        }
    }

    pub fn lanczos(&self) -> LanczosOptions {
        LanczosOptions {
            tol: self.solver.lanczos_tol,
            max_basis: self.solver.max_basis,
            max_restarts: self.solver.max_restarts,
            block: 0,
            seed: self.experiment.seed,
        }
    }

    pub fn tqo_options(&self) -> TqoOptions {
        TqoOptions {
            tol: self.solver.tqo_tol,
            samples: self.solver.tqo_samples,
            seed: self.experiment.seed,
            caps: self.caps(),
            ..TqoOptions::default()
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            tol: self.flow.tol,
            gap_floor: self.flow.gap_floor,
            ..FlowOptions::default()
        }
    }

    pub fn s_grid(&self) -> Vec<f64> {
        match &self.path.s_grid {
            Some(g) => g.clone(),
            None => (0..self.path.points).map(|i| i as f64 / (self.path.points - 1) as f64).collect(),
        }
    }

    pub fn build_model(&self) -> Result<CommutingProjectorModel, AppError> {
        self.build_model_with(self.model.side)
    }

    /// The model with the lattice side replaced (for sweeps).
    pub fn build_model_with(&self, side: Option<usize>) -> Result<CommutingProjectorModel, AppError> {
        if let Some(f) = &self.model.file {
            return Ok(load_model(f)?);
        }
        let l = side.ok_or_else(|| AppError::Config("model.L: required for builtin models".into()))?;
        Ok(match self.model.builtin.as_deref() {
            Some("ising") => build_ising(l, self.model.dim.unwrap_or(1))?,
            _ => build_toric_code(l)?,
        })
    }

    pub fn build_family(&self, model: &CommutingProjectorModel) -> Result<LocalFamily, AppError> {
        self.build_family_with(model, self.perturbation.h)
    }

    /// The family with the field strength replaced (for sweeps).
    pub fn build_family_with(&self, model: &CommutingProjectorModel, h: f64) -> Result<LocalFamily, AppError> {
        let p = &self.perturbation;
        let fam = match p.kind {
            PerturbationKind::None => LocalFamily::empty(model.lattice, "none"),
            PerturbationKind::Field => uniform_field(model, parse_axis(&p.axis).expect("validated"), h)?,
            PerturbationKind::Random => random_family(
                model,
                p.j,
                p.mu,
                p.r_max,
                p.seed.unwrap_or(self.experiment.seed),
                &RandomFamilyOptions::default(),
            )?,
            PerturbationKind::File => {
                let f = load_family(p.file.as_ref().expect("validated"))?;
                if f.n_qubits() != model.n_qubits() {
                    return Err(AppError::Config("perturbation.file: family and model sizes differ".into()));
                }
                f
            }
        };
        if p.compress {
            Ok(block_diagonal_part(&fam, model)?)
        } else {
            Ok(fam)
        }
    }
}

pub fn parse_axis(s: &str) -> Option<Pauli> {
    match s {
        "X" | "x" => Some(Pauli::X),
        "Y" | "y" => Some(Pauli::Y),
        "Z" | "z" => Some(Pauli::Z),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = Scenario::parse("[experiment]\nkind = \"spectrum\"\n").unwrap();
        assert_eq!(s.model.side, Some(2));
        assert_eq!(s.solver.eigenvalues, None);
        assert_eq!(s.s_grid().len(), 11);
    }

    #[test]
    fn unknown_field_is_named() {
        let e = Scenario::parse("[experiment]\nkind = \"spectrum\"\n[solver]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = Scenario::parse("[experiment]\nkind = \"spectrum\"\n[perturbation]\nkind = \"field\"\nh = 2.0\n").unwrap_err();
        assert!(e.to_string().contains("perturbation.h"), "{e}");
    }
}
