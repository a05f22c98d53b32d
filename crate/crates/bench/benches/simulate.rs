use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use shemoments::kernels::TwoPointQuery;
use shemoments::local_time::JointLocalTimeLaw;
use shemoments::measure::InitialMeasure;
use shemoments::simulate::{
    fk_two_point, path_rng, spde_estimate_two_point, Boundary, InitialFunction, McConfig, Rho, SpdeGrid,
};

fn sampler(c: &mut Criterion) {
    let law = JointLocalTimeLaw::new(1.0, 1.0).unwrap();
    let mut rng = path_rng(1, 0);
    c.bench_function("joint law sample", |b| b.iter(|| law.sample(&mut rng)));
}

fn engines(c: &mut Criterion) {
    let mut g = c.benchmark_group("engines");
    g.sample_size(10);
    let q = TwoPointQuery::new(1.0, 0.0, 0.5).unwrap();
    let one = InitialFunction::Constant { value: 1.0 };
    g.bench_function("fk 1e4 paths", |b| {
        b.iter(|| fk_two_point(black_box(&q), &one, 1.0, 1.0, &McConfig::new(10_000, 3)))
    });
    let grid = SpdeGrid {
        half_width: 2.0,
        dx: 0.05,
        dt: 1e-3,
        t_final: 0.1,
        boundary: Boundary::Neumann0,
    };
    let q = TwoPointQuery::new(0.1, 0.0, 0.0).unwrap();
    g.bench_function("spde 100 paths", |b| {
        b.iter(|| {
            spde_estimate_two_point(
                black_box(&q),
                &InitialMeasure::lebesgue(),
                &Rho::Linear { lambda: 1.0 },
                1.0,
                &grid,
                &McConfig::new(100, 3),
            )
        })
    });
    g.finish();
}

criterion_group!(benches, sampler, engines);
criterion_main!(benches);
