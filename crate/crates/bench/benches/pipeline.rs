use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use semialg::integrate::{fundamental_chain, integrate, stokes_residual, QuadratureRule};
use semialg::measure::grid_measure;
use semialg::panelbeat::demos::{run_demo, DemoOptions, Example};
use semialg::triangulate::triangulate;
use semialg_bench::{area_form, unit_disk, x_dy};

fn triangulation(c: &mut Criterion) {
    let disk = unit_disk();
    let mut g = c.benchmark_group("triangulate_disk");
    for depth in [3u32, 4, 5] {
        g.bench_with_input(BenchmarkId::from_parameter(depth), &depth, |b, &d| {
            b.iter(|| triangulate(black_box(&disk), d).unwrap())
        });
    }
    g.finish();
}

fn integration(c: &mut Criterion) {
    let bundle = triangulate(&unit_disk(), 5).unwrap();
    let mu = fundamental_chain(&bundle).unwrap();
    c.bench_function("integrate_area_depth5", |b| {
        b.iter(|| integrate(black_box(&area_form()), &bundle, 4).unwrap())
    });
    c.bench_function("stokes_x_dy_depth5", |b| {
        b.iter(|| stokes_residual(black_box(&x_dy()), &bundle, &mu, 4).unwrap())
    });
    c.bench_function("quadrature_rule_3d_deg8", |b| b.iter(|| QuadratureRule::new(3, black_box(8)).unwrap()));
}

fn measure(c: &mut Criterion) {
    let disk = unit_disk();
    c.bench_function("grid_measure_disk_n32", |b| b.iter(|| grid_measure(black_box(&disk), 2, 32).unwrap()));
}

fn panel_beating(c: &mut Criterion) {
    let opts = DemoOptions::default();
    c.bench_function("demo_sqrt", |b| b.iter(|| run_demo(Example::Sqrt, black_box(&opts)).unwrap()));
    c.bench_function("demo_abs", |b| b.iter(|| run_demo(Example::Abs, black_box(&opts)).unwrap()));
}

criterion_group!(benches, triangulation, integration, measure, panel_beating);
criterion_main!(benches);
