use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcu_core::geometry::farthest_point_sample_from;
use pcu_core::metrics::chamfer;
use pcu_core::net::{forward, Init, NetworkConfig, NetworkWeights, Variant};
use pcu_core::{Point3, PointCloud, Rng, SpatialIndex};

fn cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = Rng::new(seed);
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.normal(), rng.normal(), rng.normal()))
            .collect(),
    )
    .unwrap()
}

fn knn(c: &mut Criterion) {
    let mut g = c.benchmark_group("knn16");
    for n in [1024, 8192] {
        let pc = cloud(n, 1);
        let index = SpatialIndex::build(&pc);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                for &p in pc.points() {
                    black_box(index.knn(p, 16).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("chamfer");
    for n in [1024, 8192] {
        let (a, b) = (cloud(n, 2), cloud(n, 3));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| chamfer(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn fps(c: &mut Criterion) {
    let pc = cloud(8192, 4);
    c.bench_function("fps_8192_to_1024", |b| {
        b.iter(|| farthest_point_sample_from(black_box(&pc), 1024, 0).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    for v in Variant::ALL {
        let config = NetworkConfig::default().with_variant(v);
        let w = NetworkWeights::init(&config, Init::Glorot, 5);
        let input = cloud(256, 6);
        g.bench_with_input(BenchmarkId::new("256", v.letter()), &v, |b, _| {
            b.iter(|| forward(&config, &w, black_box(&input)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, knn, metrics, fps, network);
criterion_main!(benches);
