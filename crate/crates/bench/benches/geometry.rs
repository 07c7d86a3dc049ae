use criterion::{black_box, criterion_group, criterion_main, Criterion};

use finsler::catalog;
use finsler::connections::{cartan_connection, contracted_curvature, spray_coefficients};
use finsler::dsl::BaseExpr;
use finsler::geodesics::{integrate_geodesic, Integrator};
use finsler::tensors::fundamental_tensor;
use finsler::transnormal::finsler_gradient;
use finsler_bench::{pond_points, sphere};

fn tensors(c: &mut Criterion) {
    let pond = catalog::pond();
    let pts = pond_points();
    c.bench_function("fundamental_tensor/pond", |b| {
        b.iter(|| {
            for (x, y) in &pts {
                black_box(fundamental_tensor(&pond, x, y).unwrap());
            }
        })
    });
    c.bench_function("spray/pond", |b| {
        b.iter(|| {
            for (x, y) in &pts {
                black_box(spray_coefficients(&pond, x, y).unwrap());
            }
        })
    });
    c.bench_function("cartan_connection/pond", |b| {
        b.iter(|| {
            for (x, y) in &pts {
                black_box(cartan_connection(&pond, x, y).unwrap());
            }
        })
    });
}

fn curvature(c: &mut Criterion) {
    let s3 = sphere(3);
    let pts = s3.sample_tangents(8, 42);
    c.bench_function("contracted_curvature/sphere3", |b| {
        b.iter(|| {
            for (x, y) in &pts {
                black_box(contracted_curvature(&s3, x, y).unwrap());
            }
        })
    });
}

fn flows(c: &mut Criterion) {
    let pond = catalog::pond();
    let rho = BaseExpr {
        expr: catalog::pond_rho(),
        n: 2,
    };
    c.bench_function("finsler_gradient/pond", |b| {
        b.iter(|| black_box(finsler_gradient(&pond, &rho, &[1.0, 0.5]).unwrap()))
    });
    let mut group = c.benchmark_group("geodesic");
    group.sample_size(10);
    group.bench_function("pond_rk4_t1", |b| {
        b.iter(|| black_box(integrate_geodesic(&pond, &[0.5, 0.0], &[0.0, 1.0], 1.0, Integrator::default()).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, tensors, curvature, flows);
criterion_main!(benches);
