use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use hyperdyn_core::dynamics::f_apply;
use hyperdyn_core::energy::{attractor_cloud, build_g, default_levels, energy_psi, estimate_gamma};
use hyperdyn_core::foliation::{gap_at, tangency_scan, GridSpec, DEFAULT_TANGENCY_TOL};
use hyperdyn_core::gluing::glue;
use hyperdyn_core::product::{leaf_point, phi_apply};
use hyperdyn_core::torus::da_apply;
use hyperdyn_core::{
    BlendKind, Direction, GluingKind, LeafPart, ManifoldPoint, ProductPoint, Side, SurfaceCoords, SurgerySystem,
    SystemConfig, TorusPoint,
};

fn system(kind: GluingKind) -> SurgerySystem {
    SurgerySystem::new(SystemConfig { gluing_kind: kind, ..SystemConfig::default() }).unwrap()
}

/// Deterministic spread of torus points.
fn torus_points(n: usize) -> Vec<TorusPoint> {
    let g = 0.618_033_988_749_894_9;
    (0..n).map(|k| TorusPoint::new((k as f64 * g).fract(), (k as f64 * g * g).fract())).collect()
}

fn shell_point(sys: &SurgerySystem) -> ProductPoint {
    leaf_point(sys, 0.4, LeafPart::Cylinder, SurfaceCoords::Cylinder { angle: 0.3, height: 0.01 }).unwrap()
}

fn kernels(c: &mut Criterion) {
    let plain = system(GluingKind::Plain);
    let generic = system(GluingKind::Generic);
    let pts = torus_points(256);
    c.bench_function("da_apply x256", |b| {
        b.iter(|| pts.iter().map(|&p| da_apply(&plain, BlendKind::A, black_box(p)).u).sum::<f64>())
    });
    c.bench_function("phi_apply A x256", |b| {
        b.iter(|| {
            pts.iter()
                .map(|&w| phi_apply(Side::A, &plain, black_box(ProductPoint::new(w, 0.01)), Direction::Fwd).z)
                .sum::<f64>()
        })
    });
    let p = shell_point(&plain);
    c.bench_function("glue plain", |b| b.iter(|| glue(&plain, black_box(p)).unwrap()));
    c.bench_function("glue generic", |b| b.iter(|| glue(&generic, black_box(p)).unwrap()));
    let m = ManifoldPoint::new(Side::R, p);
    c.bench_function("f_apply shell point", |b| b.iter(|| f_apply(&plain, black_box(m), Direction::Fwd).unwrap()));
    let q = glue(&plain, p).unwrap();
    c.bench_function("gap_at", |b| b.iter(|| gap_at(&plain, black_box(q)).unwrap()));
}

fn scans(c: &mut Criterion) {
    let mut group = c.benchmark_group("scans");
    group.sample_size(10);
    for kind in [GluingKind::Plain, GluingKind::Generic] {
        let sys = system(kind);
        group.bench_function(format!("tangency 16x16x4 {kind:?}"), |b| {
            b.iter(|| tangency_scan(&sys, GridSpec::for_system(&sys, 16, 16, 4), DEFAULT_TANGENCY_TOL).summary)
        });
    }
    let sys = system(GluingKind::Plain);
    let cloud = attractor_cloud(&sys, 100, 20).unwrap();
    let gamma = estimate_gamma(&sys, &default_levels(), 32, 1, &cloud).unwrap();
    group.bench_function("build_g", |b| b.iter(|| build_g(black_box(&gamma), 1e-8).unwrap()));
    let g = build_g(&gamma, 1e-8).unwrap();
    let m = ManifoldPoint::new(Side::R, shell_point(&sys));
    group.bench_function("energy_psi", |b| {
        b.iter_batched(|| m, |m| energy_psi(&sys, &g, black_box(m)), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, kernels, scans);
criterion_main!(benches);
