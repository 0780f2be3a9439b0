use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lgpoly::operator::{build_operator, neg_log_lambda1};
use lgpoly::polymer::{log_partition_grid, max_free_energy_exact, LatticePoint};
use lgpoly::sampler::sample_field;
use lgpoly::tw::TwEvaluator;

fn bench_sampler(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_field");
    for n in [64usize, 256] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| sample_field(black_box(1.0), n, n, 42).unwrap())
        });
    }
    g.finish();
}

fn bench_dp_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_partition_grid");
    for n in [64usize, 256] {
        let field = sample_field(0.5, n, n, 7).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &field, |b, f| {
            b.iter(|| log_partition_grid(black_box(f), LatticePoint::new(1, 1)).unwrap())
        });
    }
    g.finish();
}

fn bench_exact_max(c: &mut Criterion) {
    let mut g = c.benchmark_group("max_free_energy_exact");
    g.sample_size(10);
    for n in [32usize, 64] {
        let field = sample_field(5.0, n, n, 7).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &field, |b, f| {
            b.iter(|| max_free_energy_exact(black_box(f)).unwrap())
        });
    }
    g.finish();
}

fn bench_operator(c: &mut Criterion) {
    let field = sample_field(1.0, 24, 24, 3).unwrap();
    let op = build_operator(&field).unwrap();
    let rhs = vec![1.0; op.n_sites()];
    c.bench_function("triangular_solve_24", |b| {
        b.iter(|| op.solve(black_box(&rhs)))
    });
    c.bench_function("neg_log_lambda1_16", |b| {
        let f = sample_field(1.0, 16, 16, 3).unwrap();
        b.iter(|| neg_log_lambda1(black_box(&f)).unwrap())
    });
}

fn bench_tw(c: &mut Criterion) {
    let eval = TwEvaluator::new(40, 10.0).unwrap();
    c.bench_function("f_gue_order40", |b| b.iter(|| eval.f_gue(black_box(-1.5))));
}

criterion_group!(
    benches,
    bench_sampler,
    bench_dp_grid,
    bench_exact_max,
    bench_operator,
    bench_tw
);
criterion_main!(benches);
