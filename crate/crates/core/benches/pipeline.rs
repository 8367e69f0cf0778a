//! Parallel versus sequential execution of the data-parallel stages.
//!
//! Every stage runs twice: once on the rayon pool and once inside
//! `par::sequential`. Without the `parallel` feature both variants run on
//! the calling thread.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkGroup, Criterion};
use criterion::measurement::WallTime;
use spinradar::estimation::{mc_ransac, ransac_rigid, MeasurementNoise, RansacConfig};
use spinradar::eval::{compound, kitti_drift};
use spinradar::features::detect_cen2018;
use spinradar::pipeline::{extract_features, run_odometry, FrontEndConfig, OdometryConfig};
use spinradar::scan::RadarConfig;
use spinradar::sim::{
    simulate_pair, simulate_sequence, true_matches, ReturnPositions, SceneGenerator, SimOptions, SimScene,
};
use spinradar::{par, BodyVelocity, Pose};

fn scene() -> SimScene {
    SimScene::new(
        SceneGenerator::with_seed(1).landmarks().unwrap(),
        BodyVelocity::planar(15.0, 0.0, 0.4),
    )
}

fn options() -> SimOptions {
    SimOptions { range_spread_bins: 3.0, beam_spread: true, ..SimOptions::default() }
}

/// Times `f` on the pool and on the calling thread.
fn both<R>(group: &mut BenchmarkGroup<'_, WallTime>, f: impl Fn() -> R) {
    group.bench_function("parallel", |b| b.iter(|| black_box(f())));
    group.bench_function("sequential", |b| b.iter(|| par::sequential(|| black_box(f()))));
}

fn configure<'a>(c: &'a mut Criterion, name: &str) -> BenchmarkGroup<'a, WallTime> {
    let mut g = c.benchmark_group(name);
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    g
}

fn simulation(c: &mut Criterion) {
    let (scene, cfg, opts) = (scene(), RadarConfig::default(), options());
    let mut g = configure(c, "simulate_4_scans");
    both(&mut g, || simulate_sequence(&scene, &cfg, &opts, 4, 7).unwrap());
    g.finish();
}

fn front_end(c: &mut Criterion) {
    let scan = simulate_pair(&scene(), &RadarConfig::default(), &options(), 3).unwrap().first.scan;
    let fe = FrontEndConfig::default();
    let mut g = configure(c, "detect");
    both(&mut g, || detect_cen2018(&scan, &fe.detector).unwrap());
    g.finish();
    let mut g = configure(c, "detect_and_describe");
    both(&mut g, || extract_features(&scan, &fe).unwrap());
    g.finish();
}

fn estimation(c: &mut Criterion) {
    let pair = simulate_pair(&scene(), &RadarConfig::default(), &options(), 3).unwrap();
    let matches = true_matches(&pair.first, &pair.second, ReturnPositions::Quantized);
    let ransac = RansacConfig { max_iterations: 400, seed: 2, ..RansacConfig::default() };
    let noise = MeasurementNoise::default();
    let mut g = configure(c, "ransac_rigid");
    both(&mut g, || ransac_rigid(&matches, &ransac).unwrap());
    g.finish();
    let mut g = configure(c, "mc_ransac");
    both(&mut g, || mc_ransac(&matches, &ransac, &noise).unwrap());
    g.finish();
}

fn odometry(c: &mut Criterion) {
    let scans: Vec<_> = simulate_sequence(&scene(), &RadarConfig::default(), &options(), 4, 5)
        .unwrap()
        .into_iter()
        .map(|s| s.scan)
        .collect();
    let cfg = OdometryConfig { seed: 1, ..OdometryConfig::default() };
    let mut g = configure(c, "odometry_4_scans");
    both(&mut g, || run_odometry(&scans, &cfg).unwrap());
    g.finish();
}

fn drift(c: &mut Criterion) {
    // 3 km of gently curving road at 10 m/s, with a slightly wrong estimate.
    let step = Pose::planar(2.5, 0.0, 0.002);
    let truth = compound(0.0, &vec![(0.25, step); 1200]).unwrap();
    let estimate = compound(0.0, &vec![(0.25, Pose::planar(2.52, 0.01, 0.0021)); 1200]).unwrap();
    let mut g = configure(c, "kitti_drift_1200_poses");
    both(&mut g, || kitti_drift(&estimate, &truth).unwrap());
    g.finish();
}

criterion_group!(benches, simulation, front_end, estimation, odometry, drift);
criterion_main!(benches);
