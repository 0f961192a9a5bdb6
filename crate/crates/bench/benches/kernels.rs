use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use homog_bench::{checkerboard, linear_power, square};
use homog_core::macroscopic::{solve_macro, MacroOptions};
use homog_core::metric::{MetricProblem, SupportSource};
use homog_core::{Fan, SublevelGeometry, Vec2, ValueRange};

fn dijkstra(c: &mut Criterion) {
    let env = checkerboard(1, 2);
    let family = linear_power();
    let mut g = c.benchmark_group("dijkstra");
    g.sample_size(10);
    for side in [256i64, 1024] {
        let lattice = square(side, 2);
        let source = lattice.index(0, 0).unwrap();
        g.bench_function(format!("{side}x{side}"), |b| {
            b.iter(|| MetricProblem::new(&lattice, &family, &env, 1.0).solve(black_box(source)).unwrap())
        });
    }
    let lattice = square(256, 2);
    let source = lattice.index(0, 0).unwrap();
    g.bench_function("256x256_fan64", |b| {
        b.iter(|| {
            MetricProblem::new(&lattice, &family, &env, 1.0)
                .with_support(SupportSource::Fan { dirs: 64 })
                .solve(black_box(source))
                .unwrap()
        })
    });
    g.finish();
}

fn field(c: &mut Criterion) {
    let env = checkerboard(7, 2);
    c.bench_function("checkerboard_value_1e5", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..100_000 {
                acc += env.value(Vec2::new(0.37 * k as f64, -0.11 * k as f64));
            }
            black_box(acc)
        })
    });
}

fn geometry(c: &mut Criterion) {
    let family = homog_core::HamiltonianFamily::Drift { drift: Vec2::new(0.3, 0.1), modulation: 0.5 };
    let range = ValueRange { min: 0.0, max: 1.0 };
    let fan = Fan::uniform(64, 2);
    c.bench_function("sublevel_geometry_fan64", |b| {
        b.iter(|| SublevelGeometry::build_for_value(&family, black_box(0.5), range, 1.0, &fan).unwrap())
    });
}

fn macro_solve(c: &mut Criterion) {
    let family = linear_power();
    let mut g = c.benchmark_group("macro");
    g.sample_size(10);
    let one = checkerboard(3, 1);
    g.bench_function("godunov_1d_delta0.05", |b| {
        b.iter_batched(
            MacroOptions::default,
            |o| solve_macro(&family, &one, Vec2::on_axis(1.0), 0.05, &o).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let two = checkerboard(3, 2);
    let opts = MacroOptions { h: 0.25, ..MacroOptions::default() };
    g.bench_function("lax_friedrichs_2d_delta0.5", |b| {
        b.iter(|| solve_macro(&family, &two, Vec2::new(0.6, 0.3), 0.5, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dijkstra, field, geometry, macro_solve);
criterion_main!(benches);
