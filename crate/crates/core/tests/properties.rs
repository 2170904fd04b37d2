use std::sync::OnceLock;

use proptest::prelude::*;
use tqolab_core::filters::{build_F, build_g, FilterSpec};
use tqolab_core::operators::dense::{self, CMat};
use tqolab_core::operators::locality::conditional_expectation_pauli;
use tqolab_core::operators::matrix::pauli_matrix;
use tqolab_core::operators::{Pauli, PauliString, PauliSum};
use tqolab_core::spectral::{check_relbound_containment, check_theorem1, cluster_bands, random_relbound_instance};
use tqolab_core::Complex64;

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn word(n: usize) -> impl Strategy<Value = PauliString> {
    proptest::collection::vec(pauli(), n).prop_map(move |ops| {
        let ops: Vec<(usize, Pauli)> = ops.into_iter().enumerate().collect();
        PauliString::from_ops(n, &ops).unwrap()
    })
}

fn filters() -> &'static (FilterSpec, FilterSpec) {
    static F: OnceLock<(FilterSpec, FilterSpec)> = OnceLock::new();
    F.get_or_init(|| (build_F(0.5, 2.0).unwrap(), build_g(0.5, 2.0).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_matrices(a in word(3), b in word(3)) {
        let ab = a.mul(&b).unwrap();
        let lhs = pauli_matrix(&ab).unwrap();
        let rhs = &pauli_matrix(&a).unwrap() * &pauli_matrix(&b).unwrap();
        prop_assert!(dense::max_abs(&(&lhs - &rhs)) < 1e-14);
        let comm = dense::commutator(&pauli_matrix(&a).unwrap(), &pauli_matrix(&b).unwrap());
        prop_assert_eq!(a.commutes(&b).unwrap(), dense::max_abs(&comm) < 1e-14);
    }

    #[test]
    fn conditional_expectation_is_idempotent(
        words in proptest::collection::vec(word(4), 1..6),
        coeffs in proptest::collection::vec(-1.0f64..1.0, 6),
        keep in proptest::sample::subsequence(vec![0usize, 1, 2, 3], 0..4),
    ) {
        let mut sum = PauliSum::new(4);
        for (w, c) in words.iter().zip(&coeffs) {
            sum.push_real(*c, w.clone()).unwrap();
        }
        let once = conditional_expectation_pauli(&sum, &keep);
        let twice = conditional_expectation_pauli(&once, &keep);
        prop_assert_eq!(once.combined(), twice.combined());
        for (_, p) in once.combined() {
            prop_assert!(p.support().iter().all(|q| keep.contains(q)));
        }
    }

    #[test]
    fn bands_partition_the_spectrum(mut eigs in proptest::collection::vec(-3.0f64..10.0, 1..40), threshold in 0.05f64..1.0) {
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let b = cluster_bands(&eigs, threshold).unwrap();
        prop_assert_eq!(b.bands.iter().map(|x| x.count).sum::<usize>(), eigs.len());
        for w in b.bands.windows(2) {
            prop_assert!(w[1].lo - w[0].hi > threshold);
        }
        let labels = b.labels();
        for i in 1..eigs.len() {
            if labels[i] == labels[i - 1] {
                prop_assert!(eigs[i] - eigs[i - 1] <= threshold);
            }
        }
    }

    #[test]
    fn fitted_constants_cover_the_spectrum(
        offsets in proptest::collection::vec(-0.2f64..0.2, 12),
        j in 0.01f64..0.1,
    ) {
        let mut eigs: Vec<f64> = (0..12).map(|i| (i / 4) as f64 * 2.0 + offsets[i] * if i < 4 { 0.05 } else { 1.0 }).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let bands = cluster_bands(&eigs, 0.5).unwrap();
        prop_assume!(bands.bands.len() == 3);
        let fit = check_theorem1(&bands, &[0.0, 2.0, 4.0], j, 0.0, 0.0);
        let again = check_theorem1(&bands, &[0.0, 2.0, 4.0], j, fit.fitted_c1 * (1.0 + 1e-9), fit.fitted_delta);
        prop_assert!(again.covered);
    }

    #[test]
    fn relative_bound_contains_spectrum(seed in 0u64..10_000, dim in 8usize..48) {
        let (h0, w, target) = random_relbound_instance(dim, 3, seed).unwrap();
        let rb = check_relbound_containment(&h0, &w, 1e-10).unwrap();
        prop_assert!((rb.b - target).abs() <= 1e-9 * (1.0 + target));
        prop_assert_eq!(rb.contained, Some(true));
    }

    #[test]
    fn filter_parities(w in -20.0f64..20.0) {
        let (f, g) = filters();
        prop_assert!((f.fourier(w) + f.fourier(-w)).abs() <= 1e-12 * (1.0 + f.fourier(w).abs()));
        prop_assert!((g.fourier(w) - g.fourier(-w)).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&g.fourier(w)));
        if w.abs() >= 0.5 {
            prop_assert!(g.fourier(w) == 0.0);
        }
    }

    #[test]
    fn polar_factor_is_unitary(entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)) {
        let a = CMat::from_fn(4, 4, |i, j| {
            let (re, im) = entries[4 * i + j];
            Complex64::new(re, im) + if i == j { Complex64::new(2.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let u = dense::polar(&a).unwrap();
        prop_assert!(dense::unitarity_defect(&u) <= 1e-12);
    }
}
