//! Criterion benchmarks for the four registration kernels: descriptor
//! matching, rigid solve, RANSAC, and ICP.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mapreg::{
    align_kabsch, icp_refine, match_descriptors, normalize_descriptors, ransac_align,
    Correspondence, DescriptorCloud, IcpConfig, MatchConfig, PointCloud, RansacConfig,
    RigidTransform,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            )
        })
        .collect()
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DescriptorCloud {
    let points = random_points(rng, n, 50.0);
    let descriptors: Vec<f32> = (0..n * dim).map(|_| rng.random_range(0.05..1.0f32)).collect();
    let raw = DescriptorCloud::new(PointCloud::new(points), descriptors, dim).unwrap();
    normalize_descriptors(&raw)
}

fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    let angles = Vector3::new(
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-3.0..=3.0),
    );
    let rotation = nalgebra::Rotation3::from_euler_angles(angles.x, angles.y, angles.z);
    let translation = Vector3::new(
        rng.random_range(-20.0..=20.0),
        rng.random_range(-20.0..=20.0),
        rng.random_range(-2.0..=2.0),
    );
    RigidTransform::new(rotation.into_inner(), translation)
}

fn bench_matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("match_descriptors");
    group.sample_size(10);
    for &(scan_n, map_n, dim) in &[(1_000usize, 50_000usize, 64usize), (1_000, 50_000, 384)] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = random_cloud(&mut rng, scan_n, dim);
        let map = random_cloud(&mut rng, map_n, dim);
        let cfg = MatchConfig { cos_threshold: 0.8, exact: true };
        group.throughput(Throughput::Elements((scan_n * map_n) as u64));
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{scan_n}x{map_n}_d{dim}")),
            &(&scan, &map),
            |b, (scan, map)| b.iter(|| match_descriptors(scan, map, &cfg).unwrap()),
        );
    }
    group.finish();
}

fn bench_kabsch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth = random_transform(&mut rng);
    let src = random_points(&mut rng, 1_000, 30.0);
    let dst: Vec<Vector3<f64>> = src.iter().map(|p| truth.apply_point(p)).collect();
    c.bench_function("align_kabsch_1000", |b| {
        b.iter(|| align_kabsch(&src, &dst).unwrap())
    });
}

fn bench_ransac(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = random_transform(&mut rng);
    let n = 200;
    let scan_points = random_points(&mut rng, n, 30.0);
    let map_points: Vec<Vector3<f64>> = scan_points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i % 10 < 3 {
                truth.apply_point(p)
            } else {
                Vector3::new(
                    rng.random_range(-50.0..=50.0),
                    rng.random_range(-50.0..=50.0),
                    rng.random_range(-50.0..=50.0),
                )
            }
        })
        .collect();
    let scan = PointCloud::new(scan_points);
    let map = PointCloud::new(map_points);
    let corrs: Vec<Correspondence> = (0..n)
        .map(|i| Correspondence { scan_index: i, map_index: i, similarity: 1.0 })
        .collect();
    let cfg = RansacConfig { iterations: 2_000, ..RansacConfig::default() };
    c.bench_function("ransac_2000_iters_200_corrs", |b| {
        b.iter(|| ransac_align(&scan, &map, &corrs, &cfg).unwrap())
    });
}

fn bench_icp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let map_points = random_points(&mut rng, 20_000, 40.0);
    let truth = random_transform(&mut rng);
    let inv = truth.inverse();
    let scan_points: Vec<Vector3<f64>> =
        map_points.iter().take(4_000).map(|p| inv.apply_point(p)).collect();
    let scan = PointCloud::new(scan_points);
    let map = PointCloud::new(map_points);
    // Start ICP from a pose 0.3 m / ~1 deg off the truth.
    let nudge = RigidTransform::new(
        nalgebra::Rotation3::from_euler_angles(0.0, 0.0, 0.02).into_inner(),
        Vector3::new(0.3, -0.2, 0.05),
    );
    let init = nudge.compose(&truth);
    let cfg = IcpConfig::default();
    let mut group = c.benchmark_group("icp_refine");
    group.sample_size(20);
    group.bench_function("4000_scan_20000_map", |b| {
        b.iter(|| icp_refine(&scan, &map, &init, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_matching, bench_kabsch, bench_ransac, bench_icp);
criterion_main!(benches);
