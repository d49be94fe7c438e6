use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gwspectra_core::offspring::PotentialModel;
use gwspectra_core::rde::{evolve, Population, RdeSpec};
use gwspectra_core::{Exec, HalfPlanePoint, OffspringLaw};

fn sweeps(c: &mut Criterion) {
    let law = OffspringLaw::poisson(5.0).unwrap();
    let z = HalfPlanePoint::new(0.5, 0.01).unwrap();
    let mut group = c.benchmark_group("bulk_sweep");
    group.sample_size(10);
    for m in [10_000usize, 100_000] {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let mut spec = RdeSpec::plain(law.clone(), law.clone(), PotentialModel::Zero);
            spec.exec = exec;
            let pop = evolve(Population::new(z, m).unwrap(), &spec, 5).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), m), &pop, |b, pop| {
                b.iter(|| evolve(pop.clone(), &spec, 1).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
