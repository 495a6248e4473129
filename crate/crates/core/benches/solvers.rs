//! Hot paths under both backends.
//!
//! `cargo bench` measures the rayon build, once on a single-thread pool and once on the full
//! pool; `cargo bench --no-default-features` adds the sequential build under the same
//! group names, so criterion's report puts all three side by side.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vche::nonlinear::btilde;
use vche::optimizer::solve_problem;
use vche::{Grid, ProblemConfig, ReducedProblem, SolveOptions, SparsityKind, SpectralField};

fn backends() -> Vec<(String, Option<usize>)> {
    #[cfg(feature = "parallel")]
    {
        let all = std::thread::available_parallelism().map_or(1, |n| n.get());
        let mut out = vec![("rayon-1".to_string(), Some(1))];
        if all > 1 {
            out.push((format!("rayon-{all}"), Some(all)));
        }
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential".to_string(), None)]
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        return rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(f);
    }
    let _ = threads;
    f()
}

fn problem(n: usize) -> ReducedProblem {
    let mut cfg = ProblemConfig::default();
    cfg.grid.n = [n; 3];
    ReducedProblem::from_config(&cfg).unwrap()
}

fn bench_btilde(c: &mut Criterion) {
    let mut group = c.benchmark_group("btilde");
    for n in [16, 32] {
        let g = Grid::cubic(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(&g, &mut rng, 1.0, 1.0);
        let v = SpectralField::random(&g, &mut rng, 1.0, 1.0);
        for (name, t) in backends() {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                with_threads(t, || b.iter(|| btilde(&u, &v).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_forward_and_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduced");
    group.sample_size(20);
    for n in [8, 16] {
        let p = problem(n);
        let u = p.zero_control().map(|_| 0.3);
        for (name, t) in backends() {
            group.bench_with_input(BenchmarkId::new(format!("forward/{name}"), n), &n, |b, _| {
                with_threads(t, || b.iter(|| p.model.solve(&u, &p.y0).unwrap()))
            });
            group.bench_with_input(BenchmarkId::new(format!("gradient/{name}"), n), &n, |b, _| {
                with_threads(t, || b.iter(|| p.gradient(&u).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let p = problem(8);
    let opts = SolveOptions::default();
    for kind in [SparsityKind::J1, SparsityKind::J3] {
        for (name, t) in backends() {
            group.bench_function(BenchmarkId::new(name, kind), |b| {
                with_threads(t, || b.iter(|| solve_problem(&p, 1e-3, kind, &opts, None).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_btilde, bench_forward_and_gradient, bench_solve);
criterion_main!(benches);
