//! Experiment kinds and the artifact writer.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use tqolab_core::filters::{build_F, build_g, quadrature_multiplier, spectral_multiplier, verify_filter, FilterKind, FilterSpec};
use tqolab_core::models::{build_ising, ground_data, write_model, CommutingProjectorModel};
use tqolab_core::operators::dense;
use tqolab_core::operators::{realize_dense, Pauli, PauliOperator};
use tqolab_core::perturb::{uniform_field, write_family, LocalFamily};
use tqolab_core::spectral::{
    check_relbound_containment, check_theorem1, cluster_bands, dense_spectrum_of, gap_path, low_spectrum, path_hamiltonian,
    random_relbound_instance, SpectralBands, Theorem1Verdict,
};
use tqolab_core::tqo::{estimate_lstar, Status};

use crate::cache::Cache;
use crate::output::{num, write_atomic, write_json, Table};
use crate::scenario::{Kind, Scenario};
use crate::suite::{self, Scoreboard, Stage};
use crate::AppError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub cache: Cache,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            threads: None,
            seed: None,
            cache: Cache::disabled(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub scoreboard: Scoreboard,
}

/// Everything an experiment produces before it is written out.
pub struct Artifacts {
    pub table: Table,
    pub bands: Value,
    pub scoreboard: Scoreboard,
    pub summary: String,
}

/// Shared state for one run.
pub struct Ctx<'a> {
    pub sc: &'a Scenario,
    pub cache: &'a Cache,
    pub cache_hits: std::cell::Cell<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    scenario: &'a Scenario,
    seed: u64,
    threads: usize,
    parallel_feature: bool,
    cache_dir: Option<String>,
    cache_hits: usize,
    timings_seconds: BTreeMap<String, f64>,
    outputs: Vec<&'static str>,
    status: &'static str,
    error: Option<String>,
}

/// Runs the scenario and writes the artifacts into the output directory.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, AppError> {
    let mut sc = scenario.clone();
    if let Some(s) = opts.seed {
        sc.experiment.seed = s;
    }
    sc.validate()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| sc.outputs.dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("tqolab-{}", sc.experiment.kind.name())));
    sc.outputs.dir = Some(out_dir.clone());
    let ctx = Ctx {
        sc: &sc,
        cache: &opts.cache,
        cache_hits: std::cell::Cell::new(0),
    };
    let start = Instant::now();
    let result = execute(&ctx);
    let mut timings = BTreeMap::new();
    timings.insert("total".to_string(), start.elapsed().as_secs_f64());
    let mut manifest = Manifest {
        tool: "tqolab",
        version: env!("CARGO_PKG_VERSION"),
        experiment: sc.experiment.kind.name(),
        scenario: &sc,
        seed: sc.experiment.seed,
        threads: opts.threads.unwrap_or_else(rayon::current_num_threads),
        parallel_feature: tqolab_core::par::Exec::current() == tqolab_core::par::Exec::Parallel,
        cache_dir: opts.cache.dir().map(|d| d.display().to_string()),
        cache_hits: ctx.cache_hits.get(),
        timings_seconds: timings,
        outputs: Vec::new(),
        status: "ok",
        error: None,
    };
    match result {
        Ok(a) => {
            write_atomic(&out_dir.join("results.csv"), &a.table.to_csv()?)?;
            write_json(&out_dir.join("bands.json"), &a.bands)?;
            write_json(&out_dir.join("scoreboard.json"), &a.scoreboard)?;
            write_atomic(&out_dir.join("summary.txt"), a.summary.as_bytes())?;
            manifest.outputs = vec!["results.csv", "bands.json", "scoreboard.json", "summary.txt"];
            write_json(&out_dir.join("manifest.json"), &manifest)?;
            Ok(RunOutcome {
                out_dir,
                scoreboard: a.scoreboard,
            })
        }
        Err(e) => {
            manifest.status = e.category();
            manifest.error = Some(e.to_string());
            write_json(&out_dir.join("manifest.json"), &manifest)?;
            Err(e)
        }
    }
}

fn execute(ctx: &Ctx) -> Result<Artifacts, AppError> {
    match ctx.sc.experiment.kind {
        Kind::Spectrum => spectrum(ctx),
        Kind::GapPath => gap_path_kind(ctx),
        Kind::TqoAudit => tqo_audit(ctx),
        Kind::FlowAudit => suite::flow_audit(ctx),
        Kind::Theorem1Sweep => theorem1_sweep(ctx),
        Kind::LemmaSuite => suite::lemma_suite(ctx),
        Kind::InstabilityContrast => instability_contrast(ctx),
        Kind::RelboundSuite => relbound_suite(ctx),
        Kind::FilterCheck => filter_check(ctx),
    }
}

/// Low-lying eigenvalues of `H_0 + V`.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub method: &'static str,
    pub cached: bool,
}

/// Qubit count up to which the full spectrum is computed densely.
pub const FULL_SPECTRUM_QUBITS: usize = 10;

pub fn compute_spectrum(ctx: &Ctx, model: &CommutingProjectorModel, family: &LocalFamily) -> Result<Spectrum, AppError> {
    let sc = ctx.sc;
    let n = model.n_qubits();
    let dense_path = n <= FULL_SPECTRUM_QUBITS.min(sc.solver.dense_qubits);
    let settings = serde_json::to_string(&sc.solver).expect("serializable");
    let seed = sc.experiment.seed.to_string();
    let key = Cache::key(&[&write_model(model), &write_family(family), &settings, &seed, if dense_path { "dense" } else { "lanczos" }]);
    let method = if dense_path { "dense" } else { "lanczos" };
    if let Some(values) = ctx.cache.get(&key) {
        ctx.cache_hits.set(ctx.cache_hits.get() + 1);
        return Ok(Spectrum { values, method, cached: true });
    }
    let h = path_hamiltonian(model, family, 1.0);
    let values = if dense_path {
        let m = realize_dense(&h, &sc.caps())?;
        dense::eigvalsh(&dense::hermitian_part(&m))?
    } else {
        let op = PauliOperator::new(&h, &sc.caps())?;
        let k = sc.solver.eigenvalues.unwrap_or(model.ground_degeneracy + 1);
        low_spectrum(&op, k, &sc.lanczos())?.values
    };
    ctx.cache.put(&key, &values);
    Ok(Spectrum {
        values,
        method,
        cached: false,
    })
}

/// Distinct unperturbed levels seen by the same solver.
pub fn unperturbed_levels(ctx: &Ctx, model: &CommutingProjectorModel) -> Result<Vec<f64>, AppError> {
    let empty = LocalFamily::empty(model.lattice, "none");
    let s = compute_spectrum(ctx, model, &empty)?;
    let mut levels: Vec<f64> = Vec::new();
    for v in s.values {
        let r = v.round();
        if (v - r).abs() > 1e-6 {
            return Err(AppError::Core(tqolab_core::Error::Numerical {
                message: format!("unperturbed eigenvalue {v} is not an integer"),
                residual: (v - r).abs(),
            }));
        }
        if levels.last() != Some(&r) {
            levels.push(r);
        }
    }
    Ok(levels)
}

/// Bands of the eigenvalues within `window` of the lowest one, and the
/// containment verdict with configured (or fitted) constants.
pub fn band_analysis(
    ctx: &Ctx,
    values: &[f64],
    levels: &[f64],
    j: f64,
    window: Option<f64>,
) -> Result<(SpectralBands, Theorem1Verdict), AppError> {
    let e0 = values.first().copied().unwrap_or(0.0);
    let kept: Vec<f64> = values.iter().copied().filter(|&v| window.is_none_or(|w| v - e0 < w)).collect();
    let bands = cluster_bands(&kept, ctx.sc.solver.band_threshold)?;
    let fit = check_theorem1(&bands, levels, j, 0.0, 0.0);
    let c1 = ctx.sc.solver.c1.unwrap_or(fit.fitted_c1);
    let delta = ctx.sc.solver.delta.unwrap_or(fit.fitted_delta);
    Ok((bands.clone(), check_theorem1(&bands, levels, j, c1, delta)))
}

fn spectrum(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let model = sc.build_model()?;
    let family = sc.build_family(&model)?;
    let spec = compute_spectrum(ctx, &model, &family)?;
    let levels = unperturbed_levels(ctx, &model)?;
    let (bands, verdict) = band_analysis(ctx, &spec.values, &levels, family.strength_j, None)?;
    let labels = bands.labels();
    let mut t = Table::new(&["index", "eigenvalue", "band"]);
    for (i, (v, b)) in spec.values.iter().zip(&labels).enumerate() {
        t.push(vec![i.to_string(), num(*v), b.to_string()]);
    }
    let ground_ok = bands.bands.first().map(|b| b.count) == Some(model.ground_degeneracy);
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(
        Stage::new("ground-band", "ground band multiplicity equals the unperturbed degeneracy")
            .verdict(ground_ok)
            .metric("band0_count", bands.bands.first().map_or(0.0, |b| b.count as f64))
            .metric("delta0", bands.delta0)
            .metric("gap", bands.gap.unwrap_or(f64::NAN)),
    );
    board.push(
        Stage::new("band-containment", "every eigenvalue lies in the union of band intervals I_k")
            .verdict(verdict.covered)
            .metric("c1", verdict.c1)
            .metric("delta", verdict.delta),
    );
    let summary = format!(
        "{}: {} eigenvalues ({}), band 0 has {} members, width {:e}, gap {}\n",
        model.name,
        spec.values.len(),
        spec.method,
        bands.bands.first().map_or(0, |b| b.count),
        bands.delta0,
        bands.gap.map_or("n/a".into(), num),
    );
    Ok(Artifacts {
        table: t,
        bands: json!({ "model": model.name, "method": spec.method, "levels": levels, "bands": bands, "theorem1": verdict }),
        scoreboard: board,
        summary,
    })
}

fn gap_path_kind(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let model = sc.build_model()?;
    let family = sc.build_family(&model)?;
    let gp = gap_path(&model, &family, &sc.s_grid(), &sc.caps(), &sc.lanczos())?;
    let mut t = Table::new(&["s", "e_min", "e_max", "gap"]);
    for i in 0..gp.s_grid.len() {
        t.push(vec![num(gp.s_grid[i]), num(gp.e_min[i]), num(gp.e_max[i]), num(gp.gaps[i])]);
    }
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(
        Stage::new("gap-half", "gap stays at least 1/2 along the path")
            .verdict(gp.holds_half)
            .metric("min_gap", gp.min_gap),
    );
    board.push(Stage::new("gap-three-quarters", "gap stays at least 3/4 along the path").verdict(gp.holds_three_quarters));
    board.push(
        Stage::new("gap-relative", "gap stays at least half the unperturbed gap")
            .verdict(gp.min_gap >= 0.5 * gp.unperturbed_gap)
            .metric("unperturbed_gap", gp.unperturbed_gap),
    );
    let summary = format!("{}: min gap {} over {} points\n", model.name, num(gp.min_gap), gp.s_grid.len());
    Ok(Artifacts {
        table: t,
        bands: json!({ "model": model.name, "gap_path": gp }),
        scoreboard: board,
        summary,
    })
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Verified => "verified",
        Status::Failed => "failed",
        Status::ResourceLimited => "resource-limited",
        Status::NotApplicable => "not-applicable",
    }
}

fn tqo_audit(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let model = sc.build_model()?;
    let ground = ground_data(&model, &sc.caps())?;
    let rep = estimate_lstar(&model, &ground, &sc.tqo_options())?;
    let mut t = Table::new(&["r", "condition", "status", "violation", "coverage"]);
    for rr in &rep.radii {
        for (name, res, st) in [("tqo1", &rr.tqo1, rr.tqo1_status), ("tqo2", &rr.tqo2, rr.tqo2_status)] {
            t.push(vec![
                rr.r.to_string(),
                name.into(),
                status_name(st).into(),
                res.as_ref().map_or("".into(), |c| num(c.worst)),
                res.as_ref().map_or("".into(), |c| format!("{:?}", c.coverage).to_lowercase()),
            ]);
        }
    }
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(suite::tqo_stage(&rep));
    let summary = format!(
        "{}: TQO-1 holds to r = {}, TQO-2 to r = {}, L* = {} ({})\n",
        model.name, rep.max_r_tqo1, rep.max_r_tqo2, rep.l_star, rep.stop_reason
    );
    Ok(Artifacts {
        table: t,
        bands: json!({ "model": model.name, "ground": ground, "tqo": rep }),
        scoreboard: board,
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    side: usize,
    h: f64,
    method: &'static str,
    eigenvalues: usize,
    bands: SpectralBands,
    theorem1: Theorem1Verdict,
}

fn theorem1_sweep(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let sides = if sc.sweep.sides.is_empty() { vec![sc.model.side.expect("validated")] } else { sc.sweep.sides.clone() };
    let mut points = Vec::new();
    for &l in &sides {
        let model = sc.build_model_with(Some(l))?;
        let levels = unperturbed_levels(ctx, &model)?;
        for &h in &sc.sweep.h {
            let family = sc.build_family_with(&model, h)?;
            let spec = compute_spectrum(ctx, &model, &family)?;
            let (bands, verdict) = band_analysis(ctx, &spec.values, &levels, family.strength_j, Some(3.0))?;
            points.push(SweepPoint {
                side: l,
                h,
                method: spec.method,
                eigenvalues: bands.eigenvalues.len(),
                bands,
                theorem1: verdict,
            });
        }
    }
    let mut t = Table::new(&[
        "L",
        "h",
        "method",
        "eigenvalues",
        "band0_count",
        "delta0",
        "gap",
        "J",
        "fitted_c1",
        "fitted_delta",
        "covered",
    ]);
    for p in &points {
        t.push(vec![
            p.side.to_string(),
            num(p.h),
            p.method.into(),
            p.eigenvalues.to_string(),
            p.bands.bands.first().map_or(0, |b| b.count).to_string(),
            num(p.bands.delta0),
            p.bands.gap.map_or("".into(), num),
            num(p.theorem1.j),
            num(p.theorem1.fitted_c1),
            num(p.theorem1.fitted_delta),
            p.theorem1.covered.to_string(),
        ]);
    }
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(
        Stage::new("coverage", "eigenvalues below k = 3 lie in the band intervals I_k").verdict(points.iter().all(|p| p.theorem1.covered)),
    );
    for &l in &sides {
        let mut pts: Vec<&SweepPoint> = points.iter().filter(|p| p.side == l).collect();
        pts.sort_by(|a, b| a.h.abs().partial_cmp(&b.h.abs()).expect("finite"));
        let mono = pts.windows(2).all(|w| w[0].theorem1.fitted_c1 <= w[1].theorem1.fitted_c1);
        board.push(Stage::new(&format!("c1-trend-L{l}"), "fitted c1 does not grow as h decreases").verdict(mono));
        let width = pts.iter().all(|p| (p.theorem1.fitted_delta - p.bands.delta0).abs() <= 1e-12);
        board.push(Stage::new(&format!("delta-width-L{l}"), "fitted delta equals the measured band-0 width").verdict(width));
    }
    if let (Some(&lo), Some(&hi)) = (sides.iter().min(), sides.iter().max()) {
        if lo != hi {
            for &h in &sc.sweep.h {
                let width = |l: usize| points.iter().find(|p| p.side == l && p.h == h).map(|p| p.bands.delta0);
                if let (Some(a), Some(b)) = (width(lo), width(hi)) {
                    let ratio = b / a;
                    board.push(
                        Stage::new(&format!("width-ratio-h{}", num(h)), "band-0 width shrinks with system size")
                            .verdict(ratio < 1.0)
                            .metric("ratio", ratio)
                            .metric(&format!("delta0_L{lo}"), a)
                            .metric(&format!("delta0_L{hi}"), b),
                    );
                }
            }
        }
    }
    let mut summary = String::new();
    for p in &points {
        summary.push_str(&format!(
            "L={} h={}: delta0={:e} gap={} c1*={:e}\n",
            p.side,
            num(p.h),
            p.bands.delta0,
            p.bands.gap.map_or("n/a".into(), num),
            p.theorem1.fitted_c1
        ));
    }
    Ok(Artifacts {
        table: t,
        bands: json!({ "points": points }),
        scoreboard: board,
        summary,
    })
}

fn instability_contrast(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let side = sc.model.side.expect("validated");
    let dim = sc.model.dim.unwrap_or(2);
    let model = build_ising(side, dim)?;
    let hs = if sc.sweep.h.is_empty() { vec![sc.perturbation.h] } else { sc.sweep.h.clone() };
    let sites = model.torus().site_count();
    let mut t = Table::new(&["h", "sites", "splitting", "expected", "deviation"]);
    let mut worst: f64 = 0.0;
    for &h in &hs {
        let fam = uniform_field(&model, Pauli::Z, h)?;
        let spec = compute_spectrum(ctx, &model, &fam)?;
        let split = spec.values[1] - spec.values[0];
        let expected = 2.0 * h.abs() * sites as f64;
        worst = worst.max((split - expected).abs());
        t.push(vec![num(h), sites.to_string(), num(split), num(expected), num((split - expected).abs())]);
    }
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(
        Stage::new("linear-splitting", "ground splitting equals 2 h N under a longitudinal field")
            .verdict(worst <= 1e-10)
            .metric("max_deviation", worst),
    );
    Ok(Artifacts {
        table: t,
        bands: json!({ "model": model.name }),
        scoreboard: board,
        summary: format!("{}: splitting deviates from 2hN by at most {worst:e}\n", model.name),
    })
}

fn relbound_suite(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let sc = ctx.sc;
    let r = &sc.relbound;
    type Row = (usize, f64, f64, Option<bool>, f64);
    let rows: Vec<Result<Row, tqolab_core::Error>> =
        tqolab_core::par::map_range(tqolab_core::par::Exec::current(), r.instances, |i| {
            let seed = sc.experiment.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let (h0, w, target) = random_relbound_instance(r.dim, r.max_level, seed)?;
            let rb = check_relbound_containment(&h0, &w, 1e-10)?;
            Ok((i, target, rb.b, rb.contained, rb.worst_excess))
        });
    let mut t = Table::new(&["instance", "dim", "target_b", "b", "contained", "worst_excess"]);
    let mut failures = 0;
    for row in rows {
        let (i, target, b, contained, excess) = row?;
        if contained != Some(true) {
            failures += 1;
        }
        t.push(vec![
            i.to_string(),
            r.dim.to_string(),
            num(target),
            num(b),
            contained.map_or("n/a".into(), |c| c.to_string()),
            num(excess),
        ]);
    }
    let mut board = Scoreboard::new(sc.experiment.kind.name());
    board.push(
        Stage::new("relative-bound-containment", "spectrum of H0 + W inside the union of [λ(1-b), λ(1+b)]")
            .verdict(failures == 0)
            .metric("instances", r.instances as f64)
            .metric("violations", failures as f64),
    );
    Ok(Artifacts {
        table: t,
        bands: json!({}),
        scoreboard: board,
        summary: format!("{} instances, {failures} violations\n", r.instances),
    })
}

/// Filter properties plus the multiplier-versus-quadrature comparison on
/// a six-qubit transverse-field chain.
/// `(check, value, bound, passed)`.
pub type CheckRow = (String, f64, f64, bool);

pub fn filter_stage(ctx: &Ctx, f: &FilterSpec, g: &FilterSpec) -> Result<(Stage, Vec<CheckRow>), AppError> {
    let rf = verify_filter(f);
    let rg = verify_filter(g);
    let step = verify_filter(&FilterSpec::step_control(FilterKind::FFilter, f.cutoff)?);
    let chain = build_ising(6, 1)?;
    let fam = uniform_field(&chain, Pauli::X, 0.3)?;
    let caps = ctx.sc.caps();
    let h = realize_dense(&path_hamiltonian(&chain, &fam, 1.0), &caps)?;
    let v = realize_dense(&fam.total(), &caps)?;
    let eig = dense_spectrum_of(&h)?;
    let mf = spectral_multiplier(f, &v, &eig)?;
    let qf = quadrature_multiplier(f, &v, &eig)?;
    let mg = spectral_multiplier(g, &v, &eig)?;
    let qg = quadrature_multiplier(g, &v, &eig)?;
    let agree = dense::max_abs(&(&mf - &qf)).max(dense::max_abs(&(&mg - &qg)));
    // i R is Hermitian exactly when R is anti-Hermitian.
    let herm = dense::max_abs(&(&mf + &dense::adjoint(&mf)));
    let mut rows: Vec<CheckRow> = Vec::new();
    for (tag, rep) in [("F", &rf), ("g", &rg)] {
        for c in &rep.checks {
            rows.push((format!("{tag}:{}", c.name), c.value, c.bound, c.passed));
        }
    }
    let step_decay = step.check("time_decay").map_or(f64::NAN, |c| c.value);
    rows.push(("step-control:time_decay_fails".into(), step_decay, 1.0, step_decay > 1.0));
    rows.push(("multiplier_vs_quadrature".into(), agree, 1e-6, agree <= 1e-6));
    rows.push(("generator_hermiticity".into(), herm, 1e-12, herm <= 1e-12));
    let ok = rows.iter().all(|r| r.3);
    let mut stage = Stage::new("filters", "filter plateau, parity, smoothness and decay; generator Hermitian").verdict(ok);
    for r in &rows {
        stage = stage.metric(&r.0, r.1);
    }
    Ok((stage, rows))
}

pub fn filters_from(sc: &Scenario) -> Result<(FilterSpec, FilterSpec), AppError> {
    Ok((build_F(sc.flow.cutoff, sc.flow.sharpness)?, build_g(sc.flow.cutoff, sc.flow.sharpness)?))
}

fn filter_check(ctx: &Ctx) -> Result<Artifacts, AppError> {
    let (f, g) = filters_from(ctx.sc)?;
    let (stage, rows) = filter_stage(ctx, &f, &g)?;
    let mut t = Table::new(&["check", "value", "bound", "passed"]);
    for r in &rows {
        t.push(vec![r.0.clone(), num(r.1), num(r.2), r.3.to_string()]);
    }
    let mut board = Scoreboard::new(ctx.sc.experiment.kind.name());
    let ok = stage.passed();
    board.push(stage);
    Ok(Artifacts {
        table: t,
        bands: json!({ "F": f, "g": g }),
        scoreboard: board,
        summary: format!("filter checks {}\n", if ok { "passed" } else { "failed" }),
    })
}
