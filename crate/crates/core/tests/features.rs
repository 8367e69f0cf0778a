use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinradar::features::*;
use spinradar::pipeline::{extract_features, match_scans, FrontEndConfig};
use spinradar::scan::{CartesianImage, RadarConfig};
use spinradar::sim::*;
use spinradar::BodyVelocity;

#[test]
fn one_landmark_gives_one_keypoint() {
    let cfg = RadarConfig::small(64, 1000);
    let scene = SimScene::new(vec![Landmark::fixed(12.0, 17.0, 1.0)], BodyVelocity::zero());
    let s = simulate_scan(&scene, &cfg, 0.0, &SimOptions::ideal(), 0).unwrap();
    let kps = detect_cen2018(&s.scan, &DetectorConfig::default()).unwrap();
    assert_eq!(kps.len(), 1);
    let r = &s.returns[0];
    assert_eq!(kps[0].azimuth_index, r.azimuth_index);
    assert!((kps[0].range - r.range).abs() <= cfg.range_resolution);
    assert_eq!(kps[0].timestamp, s.scan.azimuth_timestamps()[r.azimuth_index]);
}

#[test]
fn detector_recall_at_snr_ten() {
    let cfg = RadarConfig::small(64, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let step = TAU / 64.0;
    // One landmark on every other azimuth, unit peak over a 0.1 noise floor.
    let landmarks: Vec<Landmark> = (0..32)
        .map(|k| {
            let r = rng.random_range(5.0..40.0);
            let a = 2.0 * k as f64 * step;
            Landmark::fixed(r * a.cos(), r * a.sin(), 1.0)
        })
        .collect();
    let scene = SimScene::new(landmarks, BodyVelocity::zero())
        .with_noise(SimNoise { floor_sigma: 0.1, ..Default::default() });
    let opts = SimOptions { range_spread_bins: 1.0, ..SimOptions::ideal() };
    let s = simulate_scan(&scene, &cfg, 0.0, &opts, 9).unwrap();
    let kps = detect_cen2018(&s.scan, &DetectorConfig { z_q: 8.0, ..Default::default() }).unwrap();

    let bin = |r: f64| r / cfg.range_resolution;
    let found = s
        .returns
        .iter()
        .filter(|r| {
            kps.iter()
                .any(|k| k.azimuth_index == r.azimuth_index && (bin(k.range) - bin(r.range)).abs() <= 2.0)
        })
        .count();
    assert!(found as f64 >= 0.95 * s.returns.len() as f64, "{found}/{}", s.returns.len());
    for k in &kps {
        let near = s
            .returns
            .iter()
            .any(|r| r.azimuth_index == k.azimuth_index && (bin(k.range) - bin(r.range)).abs() <= 2.0);
        assert!(near, "spurious keypoint {k:?}");
    }
}

fn random_image(width: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..width * width).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn identical_patches_have_identical_descriptors() {
    let w = 101;
    let mut px = random_image(w, 1);
    // Copy the patch around (30, 30) to around (70, 60).
    for dr in -15i64..=15 {
        for dc in -15i64..=15 {
            let src = ((30 + dr) * w as i64 + 30 + dc) as usize;
            let dst = ((70 + dr) * w as i64 + 60 + dc) as usize;
            px[dst] = px[src];
        }
    }
    let img = CartesianImage::new(w, 1.0, px).unwrap();
    let a = img.pixel_to_point(30.0, 30.0);
    let b = img.pixel_to_point(70.0, 60.0);
    let d = orb_descriptors(&img, &[a, b], &OrbConfig::default()).unwrap();
    assert_eq!(hamming(&d[0].unwrap(), &d[1].unwrap()), 0);
}

#[test]
fn unrelated_patches_differ_in_about_half_the_bits() {
    let w = 61;
    let mut total = 0.0;
    let trials = 40;
    for t in 0..trials {
        let a = CartesianImage::new(w, 1.0, random_image(w, 100 + t)).unwrap();
        let b = CartesianImage::new(w, 1.0, random_image(w, 500 + t)).unwrap();
        let p = a.pixel_to_point(30.0, 30.0);
        let da = orb_descriptors(&a, &[p], &OrbConfig::default()).unwrap()[0].unwrap();
        let db = orb_descriptors(&b, &[p], &OrbConfig::default()).unwrap()[0].unwrap();
        total += hamming(&da, &db) as f64;
    }
    let mean = total / trials as f64;
    assert!((mean - 128.0).abs() <= 20.0, "{mean}");
}

#[test]
fn copies_match_one_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d: Vec<Descriptor> = (0..50)
        .map(|_| Descriptor::Binary([rng.random(), rng.random(), rng.random(), rng.random()]))
        .collect();
    let m = match_descriptors(&d, &d, &MatchConfig::default()).unwrap();
    assert_eq!(m.len(), 50);
    for x in m {
        assert_eq!(x.index1, x.index2);
        assert_eq!(x.distance, 0.0);
    }
}

/// Landmark behind a keypoint: the closest simulated return within a metre
/// in range and the beam footprint in bearing.
fn landmark_of(k: &Keypoint, scan: &SimScan) -> Option<usize> {
    let beam = 1.5 * scan.scan.config().beamwidth;
    scan.returns
        .iter()
        .map(|r| {
            let dr = (r.apparent_range - k.range).abs();
            let da = spinradar::se3::wrap_pi(r.bearing - k.azimuth).abs();
            (r.landmark, dr, da)
        })
        .filter(|(_, dr, da)| *dr < 1.0 && *da < beam)
        .min_by(|a, b| (a.1 + a.2 * k.range).total_cmp(&(b.1 + b.2 * k.range)))
        .map(|(l, _, _)| l)
}

#[test]
fn binary_matches_are_mostly_true_correspondences() {
    let cfg = RadarConfig::default();
    let opts = SimOptions { range_spread_bins: 3.0, beam_spread: true, ..SimOptions::default() };
    let fe = FrontEndConfig::default();
    let (mut correct, mut total) = (0, 0);
    for seed in [8, 9, 10] {
        let scene = SimScene::new(
            SceneGenerator::with_seed(seed).landmarks().unwrap(),
            BodyVelocity::planar(2.0, 0.0, 0.05),
        );
        let pair = simulate_pair(&scene, &cfg, &opts, 4).unwrap();
        let f1 = extract_features(&pair.first.scan, &fe).unwrap();
        let f2 = extract_features(&pair.second.scan, &fe).unwrap();
        let m = match_scans(&f1, &f2, pair.reference_times(), &fe).unwrap();
        assert!(m.len() >= 20, "{} matches", m.len());
        total += m.len();
        correct += m
            .pairs
            .iter()
            .filter(|p| {
                let a = landmark_of(&p.first, &pair.first);
                a.is_some() && a == landmark_of(&p.second, &pair.second)
            })
            .count();
    }
    assert!(correct as f64 >= 0.8 * total as f64, "{correct}/{total} correct");
}

#[test]
fn rsd_matches_across_opposite_headings() {
    // The same landmarks seen from one spot facing opposite ways.
    let cfg = RadarConfig::default();
    let landmarks = SceneGenerator::with_seed(12).landmarks().unwrap();
    let a = SimScene::new(landmarks.clone(), BodyVelocity::zero());
    let mut b = SimScene::new(landmarks, BodyVelocity::zero());
    b.start_pose = spinradar::Pose::planar(0.5, -0.3, std::f64::consts::PI + 0.05);
    let opts = SimOptions { range_spread_bins: 3.0, ..SimOptions::ideal() };
    let sa = simulate_scan(&a, &cfg, 0.0, &opts, 1).unwrap();
    let sb = simulate_scan(&b, &cfg, 0.0, &opts, 2).unwrap();
    let fe = FrontEndConfig { descriptor: DescriptorKind::Rsd, ..Default::default() };
    let fa = extract_features(&sa.scan, &fe).unwrap();
    let fb = extract_features(&sb.scan, &fe).unwrap();
    let m = match_scans(&fa, &fb, (0.0, 0.0), &fe).unwrap();
    let mut votes: HashMap<bool, usize> = HashMap::new();
    for p in &m.pairs {
        let ok = landmark_of(&p.first, &sa).is_some() && landmark_of(&p.first, &sa) == landmark_of(&p.second, &sb);
        *votes.entry(ok).or_default() += 1;
    }
    let good = votes.get(&true).copied().unwrap_or(0);
    assert!(good >= 20 && good as f64 >= 0.5 * m.len() as f64, "{votes:?}");
}
