use tqolab_core::filters::{build_F, build_g, DEFAULT_CUTOFF, DEFAULT_SHARPNESS};
use tqolab_core::flow::{
    check_samespace, conjugated_hamiltonian, evolve_u, generator_ds, relbound_of_family, relbound_of_terms, run_pipeline, FlowOptions, FlowPath,
};
use tqolab_core::models::build_toric_code;
use tqolab_core::operators::dense;
use tqolab_core::operators::matrix::hermiticity_defect;
use tqolab_core::operators::{realize_dense, Caps, Pauli};
use tqolab_core::perturb::uniform_field;
use tqolab_core::Error;

fn filters() -> (tqolab_core::filters::FilterSpec, tqolab_core::filters::FilterSpec) {
    (build_F(DEFAULT_CUTOFF, DEFAULT_SHARPNESS).unwrap(), build_g(DEFAULT_CUTOFF, DEFAULT_SHARPNESS).unwrap())
}

#[test]
fn toric_pipeline_audits() {
    let m = build_toric_code(2).unwrap();
    let fam = uniform_field(&m, Pauli::X, 0.05).unwrap();
    let (f, g) = filters();
    let r = run_pipeline(&m, &fam, 1.0, &f, &g, 1, &FlowOptions::default(), &Caps::default()).unwrap();
    assert!(r.samespace_deviation <= 1e-6, "{}", r.samespace_deviation);
    assert!(r.unitarity_defect <= 1e-9);
    assert!(r.min_gap > 1.0);
    assert!(r.commutator <= 1e-10);
    assert!(r.commutator_raw <= 1e-6);
    assert!(r.spectrum_defect <= 1e-10);
    assert!(r.rewrite.reconstruction_error <= 1e-10);
    assert!(r.rewrite.max_commutator <= 1e-12);
    assert_eq!(r.rewrite.sites.len(), 4);
    assert!(r.end_to_end_error <= 1e-10);
    assert!(r.max_annihilation <= 1e-12);
    assert!(r.max_resolution <= 1e-12);
    for d in &r.decompositions {
        assert_eq!(d.shells, 2);
        assert!(d.audit.support <= 1e-10, "site {} support leak {}", d.site, d.audit.support);
        assert!(d.audit.orthogonality <= 1e-12);
    }
    assert!(r.relbound.combined.b < 1.0);
    assert_eq!(r.relbound.combined.contained, Some(true));
}

#[test]
fn flow_is_unitary_and_tracks_the_ground_space() {
    let m = build_toric_code(2).unwrap();
    let fam = uniform_field(&m, Pauli::Z, 0.08).unwrap();
    let path = FlowPath::new(&m, &fam, &Caps::default()).unwrap();
    let (f, _) = filters();
    for s in [0.25, 0.6] {
        let (gen, gap) = generator_ds(&path, s, &f).unwrap();
        assert!(hermiticity_defect(&gen) <= 1e-12);
        assert!(gap > 1.0);
    }
    let flow = evolve_u(&path, 0.7, &f, &FlowOptions::default()).unwrap();
    assert!(dense::unitarity_defect(&flow.u) <= 1e-9);
    assert!(check_samespace(&flow, &path).unwrap() <= 1e-6);
    assert!(flow.gaps.windows(2).all(|w| w[0].0 < w[1].0));
    let conj = conjugated_hamiltonian(&flow, &path, &m, false).unwrap();
    assert!(!conj.snapped);
    assert!(conj.commutator_raw <= 1e-6);
}

#[test]
fn closing_gap_reports_the_parameter() {
    let m = build_toric_code(2).unwrap();
    let fam = uniform_field(&m, Pauli::X, 0.9).unwrap();
    let path = FlowPath::new(&m, &fam, &Caps::default()).unwrap();
    let (f, _) = filters();
    match evolve_u(&path, 1.0, &f, &FlowOptions::default()) {
        Err(Error::GapCollapse { s, gap, .. }) => {
            assert!(s > 0.0 && s < 1.0);
            assert!(gap < 0.5);
        }
        other => panic!("expected gap collapse, got {other:?}"),
    }
}

#[test]
fn oversized_flow_is_refused() {
    let m = build_toric_code(3).unwrap();
    let fam = uniform_field(&m, Pauli::X, 0.05).unwrap();
    assert!(matches!(FlowPath::new(&m, &fam, &Caps::default()), Err(Error::Resource { .. })));
}

#[test]
fn scaled_model_terms_have_the_expected_relative_bound() {
    let m = build_toric_code(2).unwrap();
    let caps = Caps::default();
    let terms: Vec<(usize, dense::CMat)> = m
        .terms
        .iter()
        .map(|t| (1, realize_dense(&t.projector(), &caps).unwrap() * faer::Scale(dense::c(0.1))))
        .collect();
    let rb = relbound_of_terms(&terms, &m, &caps).unwrap();
    assert!(rb.annihilation <= 1e-12);
    assert!((rb.combined.b - 0.1).abs() <= 1e-10, "{}", rb.combined.b);
    assert_eq!(rb.combined.contained, Some(true));
    assert!(rb.box_checks.iter().all(|b| b.resolution <= 1e-12 && b.min_eigenvalue >= -1e-10));
}

#[test]
fn non_annihilating_term_is_an_audit_error() {
    let m = build_toric_code(2).unwrap();
    let fam = uniform_field(&m, Pauli::X, 0.05).unwrap();
    assert!(matches!(relbound_of_family(&fam, &m, &Caps::default()), Err(Error::Audit { .. })));
}
