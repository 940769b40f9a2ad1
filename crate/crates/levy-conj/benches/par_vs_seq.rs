use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levy_conj::charfn::CumulantPlan;
use levy_conj::kernel::{build_kernel, KernelFamily};
use levy_conj::mapping::apply_mapping;
use levy_conj::measure::{AnalyticDensity, Density, Direction, LevyMeasure, RadialPart, Triplet};
use levy_conj::par;
use std::hint::black_box;

fn tempered() -> Triplet {
    let d = Density::Analytic(AnalyticDensity::from_fn(
        |r: f64| r.powf(-1.5) * (-r).exp(),
        0.0,
        f64::INFINITY,
        0.5,
        f64::INFINITY,
    ));
    Triplet::id0(LevyMeasure::single(Direction::e1(1), 1.0, RadialPart::density(d)), vec![0.0]).unwrap()
}

fn cumulant_grid(c: &mut Criterion) {
    let plan = CumulantPlan::new(&tempered()).unwrap();
    let zs: Vec<f64> = (0..256).map(|i| -10.0 + 20.0 * i as f64 / 255.0).collect();
    let mut g = c.benchmark_group("cumulant_grid_256");
    g.bench_function(BenchmarkId::new("map", "par"), |b| {
        b.iter(|| par::map(zs.len(), |i| plan.eval(&[zs[i]]).unwrap().value))
    });
    g.bench_function(BenchmarkId::new("map", "seq"), |b| {
        b.iter(|| par::map_seq(zs.len(), |i| plan.eval(&[zs[i]]).unwrap().value))
    });
    g.finish();
}

fn mapped_density(c: &mut Criterion) {
    let k = build_kernel(KernelFamily::LambdaQ { q: 2.0, alpha: 0.5 }).unwrap();
    let mu = apply_mapping(&k, &tempered()).unwrap();
    let d = mu.nu.components[0].radial.density.clone().unwrap();
    let us: Vec<f64> = (0..256).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 255.0)).collect();
    let mut g = c.benchmark_group("mapped_density_256");
    g.sample_size(20);
    g.bench_function(BenchmarkId::new("map", "par"), |b| b.iter(|| par::map(us.len(), |i| d.eval(black_box(us[i])))));
    g.bench_function(BenchmarkId::new("map", "seq"), |b| b.iter(|| par::map_seq(us.len(), |i| d.eval(black_box(us[i])))));
    g.finish();
}

criterion_group!(benches, cumulant_grid, mapped_density);
criterion_main!(benches);
