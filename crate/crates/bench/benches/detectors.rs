use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use robust_qcd::calibration::estimate_mttfa;
use robust_qcd::{
    CusumState, DetectorFamily, DetectorSpec, Distribution1D, GlrState, Llr, Seed, ShiryaevState,
};
use robust_qcd_bench::gaussian_stream;

fn steps(c: &mut Criterion) {
    let xs = gaussian_stream(0.0, 10_000);
    let llr = Llr::Affine {
        slope: 0.1,
        intercept: -0.005,
    };
    let mut g = c.benchmark_group("step_10k");
    g.bench_function("cusum", |b| {
        b.iter(|| {
            let mut s = CusumState::new(f64::INFINITY);
            for &x in &xs {
                s.step(llr.eval(black_box(x)));
            }
            s.statistic
        })
    });
    g.bench_function("shiryaev", |b| {
        b.iter(|| {
            let mut s = ShiryaevState::new(0.1, f64::INFINITY).unwrap();
            for &x in &xs {
                s.step(llr.eval(black_box(x)));
            }
            s.statistic()
        })
    });
    for window in [100u64, 2000] {
        g.bench_function(format!("glr_w{window}"), |b| {
            b.iter_batched(
                || GlrState::new(0.1, 3.0, window, f64::INFINITY).unwrap(),
                |mut s| {
                    for &x in &xs {
                        s.step(black_box(x));
                    }
                    s.statistic
                },
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn mttfa(c: &mut Criterion) {
    let spec = DetectorSpec::new(
        DetectorFamily::Cusum,
        3.0,
        Some(Llr::Affine {
            slope: 1.0,
            intercept: -0.5,
        }),
    );
    let nu0 = Distribution1D::gaussian(0.0, 1.0);
    c.bench_function("mttfa_cusum_1000_runs", |b| {
        b.iter(|| estimate_mttfa(&spec, &nu0, 1000, 1_000_000, Seed::new(1, 0)).unwrap())
    });
}

criterion_group!(benches, steps, mttfa);
criterion_main!(benches);
