use criterion::{criterion_group, criterion_main, Criterion};
use robust_qcd::{huber_solve, solve_lfd, Distribution1D, UncertaintyClass};

fn huber(c: &mut Criterion) {
    let p0 = Distribution1D::gaussian(0.0, 1.0);
    let p1 = Distribution1D::gaussian(1.0, 1.0);
    c.bench_function("huber_solve_eps0.05", |b| {
        b.iter(|| huber_solve(&p0, &p1, 0.05).unwrap())
    });
    let pre = UncertaintyClass::EpsContamination {
        nominal: p0.clone(),
        eps: 0.05,
    };
    let post = UncertaintyClass::EpsContamination {
        nominal: p1.clone(),
        eps: 0.05,
    };
    let mut g = c.benchmark_group("lfd");
    g.sample_size(10);
    g.bench_function("contamination_pair_with_tables", |b| {
        b.iter(|| solve_lfd(&pre, &post).unwrap())
    });
    g.finish();
}

criterion_group!(benches, huber);
criterion_main!(benches);
