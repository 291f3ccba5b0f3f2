//! Data-parallel core against a single worker.
//!
//! With the default `parallel` feature each kernel runs twice: inside a
//! one-thread rayon pool and inside the global pool. Built with
//! `--no-default-features` only the sequential path is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hartree_lab::energy::{el_residual, ProblemSpec};
use hartree_lab::operators::{apply_multiplier, hartree_potential, MultiplierSymbol};
use hartree_lab::solver::gaussian;
use hartree_lab::{make_grid, Field};

fn fields(n: usize) -> Field {
    let g = make_grid(8.0, n).unwrap();
    gaussian(&g, [0.3, -0.2, 0.1], 1.2)
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(String, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let label = format!("rayon-{}", all.current_num_threads());
    vec![("sequential".into(), one), (label, all)]
}

fn kernels(c: &mut Criterion) {
    let spec = ProblemSpec::Rescaled { m: 1.0, c: 16.0 };
    let kinetic = MultiplierSymbol::Relativistic { m: 1.0, c: 16.0 };
    for n in [32, 64] {
        let u = fields(n);
        let mut group = c.benchmark_group(format!("n{n}"));
        group.sample_size(10);

        #[cfg(feature = "parallel")]
        for (label, pool) in modes() {
            group.bench_with_input(BenchmarkId::new("multiplier", &label), &u, |b, u| {
                pool.install(|| b.iter(|| apply_multiplier(&kinetic, u)))
            });
            group.bench_with_input(BenchmarkId::new("hartree", &label), &u, |b, u| {
                pool.install(|| b.iter(|| hartree_potential(u)))
            });
            group.bench_with_input(BenchmarkId::new("residual", &label), &u, |b, u| {
                pool.install(|| b.iter(|| el_residual(&spec, u, 0.1).unwrap()))
            });
        }

        #[cfg(not(feature = "parallel"))]
        {
            group.bench_with_input(BenchmarkId::new("multiplier", "sequential"), &u, |b, u| {
                b.iter(|| apply_multiplier(&kinetic, u))
            });
            group.bench_with_input(BenchmarkId::new("hartree", "sequential"), &u, |b, u| {
                b.iter(|| hartree_potential(u))
            });
            group.bench_with_input(BenchmarkId::new("residual", "sequential"), &u, |b, u| {
                b.iter(|| el_residual(&spec, u, 0.1).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
