use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tqolab_core::models::build_toric_code;
use tqolab_core::operators::{Caps, LinearOperator, Pauli, PauliOperator};
use tqolab_core::par::Exec;
use tqolab_core::perturb::uniform_field;
use tqolab_core::spectral::path_hamiltonian;
use tqolab_core::Complex64;

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("pauli_matvec");
    group.sample_size(10);
    for l in [2usize, 3] {
        let model = build_toric_code(l).unwrap();
        let fam = uniform_field(&model, Pauli::X, 0.05).unwrap();
        let h = path_hamiltonian(&model, &fam, 1.0);
        let d = 1usize << model.n_qubits();
        let x: Vec<Complex64> = (0..d).map(|i| Complex64::new((i % 7) as f64, (i % 3) as f64)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); d];
        for exec in [Exec::Sequential, Exec::Parallel] {
            let op = PauliOperator::new(&h, &Caps::default()).unwrap().with_exec(exec);
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), format!("toric-L{l}")), &x, |b, x| {
                b.iter(|| op.apply(x, &mut y))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, matvec);
criterion_main!(benches);
