use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinradar::scan::{load_scan, ScanFormat};
use tempfile::TempDir;

fn spinradar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinradar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = spinradar(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(args: &[&str]) -> i32 {
    spinradar(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SCENE: &str = "
start = [0.0, 0.0, 0.0]
velocity = [15.0, 0.0, 0.4]
[generator]
seed = 1001
";

const REVERSE_SCENE: &str = "
start = [1.5, -1.0, 3.2]
velocity = [15.0, 0.0, -0.4]
[generator]
seed = 1001
";

/// Wider returns, as the binary descriptors need.
const SIM_CONFIG: &str = "
[options]
range_spread_bins = 3.0
beam_spread = true
";

fn simulate(dir: &Path, scene: &str, seed: u64, frames: usize, name: &str) -> PathBuf {
    let scene = write(dir, &format!("{name}.scene.toml"), scene);
    let config = write(dir, "sim.toml", SIM_CONFIG);
    let out = dir.join(name);
    ok(&[
        "simulate",
        "--config",
        s(&config),
        "--scene",
        s(&scene),
        "--seed",
        &seed.to_string(),
        "--frames",
        &frames.to_string(),
        "--out",
        s(&out),
    ]);
    out
}

/// Every output file except the timings.
fn outputs(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.csv" {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn num(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].parse().unwrap()
}

/// Final position of a trajectory CSV.
fn endpoint(path: &Path) -> (f64, f64) {
    let last = rows(path).pop().unwrap();
    (num(&last, 4), num(&last, 8))
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), SCENE, 3, 2, "a");
    let b = simulate(dir.path(), SCENE, 3, 2, "b");
    let (fa, fb) = (outputs(&a), outputs(&b));
    assert_eq!(fa.len(), 6);
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na.as_os_str() == "manifest.toml" {
            // The manifests differ only in the paths.
            let strip = |d: &[u8]| {
                String::from_utf8_lossy(d)
                    .lines()
                    .filter(|l| !l.starts_with("output") && !l.starts_with("scene_file"))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(da), strip(db));
        } else {
            assert!(da == db, "{na:?} differs");
        }
    }
    assert!(a.join("timing.csv").is_file());
    assert_eq!(header(&a.join("velocities.csv")), "scan,timestamp,vx,vy,vz,wx,wy,wz");
}

#[test]
fn zero_velocity_scans_repeat() {
    let dir = TempDir::new().unwrap();
    let still = "velocity = [0.0, 0.0, 0.0]\n[generator]\nseed = 4\n";
    let out = simulate(dir.path(), still, 9, 3, "still");
    let scans: Vec<_> = (0..3)
        .map(|k| load_scan(out.join(format!("scans/scan_{k:04}.prs")), ScanFormat::Native).unwrap())
        .collect();
    assert!(scans[0].power().iter().any(|&p| p > 0.0));
    assert_eq!(scans[0].power(), scans[1].power());
    assert_eq!(scans[1].power(), scans[2].power());
}

#[test]
fn configuration_problems_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let scene = write(dir.path(), "scene.toml", SCENE);
    let out = dir.path().join("out");
    assert_eq!(code(&["simulate", "--scene", s(&scene), "--out", s(&out)]), 1, "seed is mandatory");
    let bad = write(dir.path(), "bad.toml", "seed = 1\nframez = 3\n");
    assert_eq!(code(&["simulate", "--config", s(&bad), "--scene", s(&scene), "--out", s(&out)]), 1);
    assert_eq!(code(&["odometry", "--scans", s(dir.path()), "--out", s(&out)]), 1, "seed is mandatory");
    assert_eq!(code(&["odometry", "--estimator", "doppler", "--seed", "1"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn data_problems_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing");
    assert_eq!(code(&["odometry", "--scans", s(&missing), "--seed", "1", "--out", s(&out)]), 2);
    let sim = simulate(dir.path(), SCENE, 1, 1, "one");
    let scans = sim.join("scans");
    assert_eq!(code(&["odometry", "--scans", s(&scans), "--seed", "1", "--out", s(&out)]), 2, "single scan");
    let two = simulate(dir.path(), SCENE, 1, 2, "two");
    assert_eq!(
        code(&["localize", "--map", s(&scans), "--query", s(&two.join("scans")), "--velocity", "truth",
               "--seed", "1", "--out", s(&out)]),
        2,
        "unpaired inputs"
    );
}

#[test]
fn odometry_is_reproducible_and_compensation_reduces_drift() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), SCENE, 21, 5, "seq");
    let scans = sim.join("scans");
    let run = |estimator: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&["odometry", "--scans", s(&scans), "--estimator", estimator, "--seed", "5", "--out", s(&out)]);
        out
    };
    let full = run("mc+doppler", "full");
    let again = run("mc+doppler", "full_again");
    let rigid = run("rigid", "rigid");
    for f in ["trajectory.csv", "pairs.csv"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert_eq!(
        header(&full.join("trajectory.csv")),
        "timestamp,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz"
    );
    assert_eq!(
        header(&full.join("pairs.csv")),
        "index,t1,t2,matches,inliers,converged,vx,vy,wz,failure"
    );
    assert_eq!(rows(&full.join("pairs.csv")).len(), 4);
    let manifest = fs::read_to_string(full.join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"odometry\"") && manifest.contains("estimator = \"mc+doppler\""));

    let truth = endpoint(&sim.join("truth.csv"));
    let err = |p: &Path| {
        let e = endpoint(&p.join("trajectory.csv"));
        (e.0 - truth.0).hypot(e.1 - truth.1)
    };
    assert!(err(&full) < err(&rigid), "full {} rigid {}", err(&full), err(&rigid));
}

fn write_trajectory(path: &Path, poses: impl Iterator<Item = (f64, f64, f64)>) {
    let mut text = String::from("timestamp,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n");
    for (t, x, y) in poses {
        text.push_str(&format!("{t},1,0,0,{x},0,1,0,{y},0,0,1,0\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn eval_reports_known_drift() {
    let dir = TempDir::new().unwrap();
    // 1 km straight at 10 m/s; the estimate overshoots every step by 1 %.
    let truth = dir.path().join("truth.csv");
    let est = dir.path().join("scaled.csv");
    write_trajectory(&truth, (0..=1000).map(|k| (0.1 * k as f64, k as f64, 0.0)));
    write_trajectory(&est, (0..=1000).map(|k| (0.1 * k as f64, 1.01 * k as f64, 0.0)));
    let out = dir.path().join("eval");
    ok(&["eval", "--estimate", s(&est), "--estimate", s(&truth), "--truth", s(&truth), "--out", s(&out)]);

    let drift = out.join("drift.csv");
    assert_eq!(
        header(&drift),
        "estimate,scope,key,translational_error_pct,rotational_error_deg_per_m,segments"
    );
    let rows = rows(&drift);
    for r in &rows {
        let expected = if &r[0] == "scaled" { 1.0 } else { 0.0 };
        assert!((num(r, 3) - expected).abs() < 1e-9, "{r:?}");
        assert_eq!(num(r, 4), 0.0);
    }
    let all: Vec<_> = rows.iter().filter(|r| &r[1] == "all").collect();
    assert_eq!(all.len(), 2);
    assert!(num(all[0], 5) > 0.0);
    assert!(rows.iter().any(|r| &r[1] == "speed" && num(r, 5) > 0.0));
    for f in ["trajectory.svg", "drift_length.svg", "drift_speed.svg", "drift.toml", "manifest.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

fn keypoints(path: &Path, scan: &str) -> Vec<(f64, f64)> {
    rows(path).iter().filter(|r| &r[0] == scan).map(|r| (num(r, 6), num(r, 7))).collect()
}

#[test]
fn undistort_with_zero_velocity_changes_nothing() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), SCENE, 2, 1, "sim");
    let out = dir.path().join("u");
    let scan = sim.join("scans/scan_0000.prs");
    ok(&["undistort", "--scan", s(&scan), "--velocity", "0,0,0", "--out", s(&out)]);
    let kp = out.join("keypoints.csv");
    assert_eq!(header(&kp), "scan,azimuth_index,range_index,timestamp,range,azimuth,x,y");
    let (raw, corrected) = (keypoints(&kp, "0"), keypoints(&kp, "1"));
    assert!(!raw.is_empty());
    assert_eq!(raw, corrected);
    assert_eq!(code(&["undistort", "--scan", s(&scan), "--out", s(&out)]), 1, "missing velocity");
}

#[test]
fn undistort_recovers_the_instantaneous_scan() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), SCENE, 2, 2, "sim");
    let ideal_cfg = write(dir.path(), "ideal.toml", &format!("{SIM_CONFIG}doppler = false\ndistortion = false\n"));
    let scene = write(dir.path(), "scene.toml", SCENE);
    let ideal = dir.path().join("ideal");
    ok(&["simulate", "--config", s(&ideal_cfg), "--scene", s(&scene), "--seed", "2", "--frames", "1", "--out", s(&ideal)]);

    let scan = sim.join("scans/scan_0000.prs");
    let truth_out = dir.path().join("truth");
    let est_out = dir.path().join("est");
    ok(&["undistort", "--scan", s(&scan), "--velocity-file", s(&sim.join("velocities.csv")), "--out", s(&truth_out)]);
    ok(&["undistort", "--scan", s(&scan), "--next-scan", s(&sim.join("scans/scan_0001.prs")), "--seed", "4",
         "--out", s(&est_out)]);
    let reference = dir.path().join("reference");
    ok(&["undistort", "--scan", s(&ideal.join("scans/scan_0000.prs")), "--velocity", "0,0,0", "--out", s(&reference)]);

    let target = keypoints(&reference.join("keypoints.csv"), "1");
    let corrected = keypoints(&truth_out.join("keypoints.csv"), "1");
    let raw = keypoints(&truth_out.join("keypoints.csv"), "0");
    // A keypoint may land on a neighbouring azimuth, so allow one azimuth
    // step of arc on top of a few range bins.
    let step = std::f64::consts::TAU / 400.0;
    let near = |p: &(f64, f64)| {
        let tol = 0.2 + step * p.0.hypot(p.1);
        target.iter().any(|q| (p.0 - q.0).hypot(p.1 - q.1) < tol)
    };
    let close = |pts: &[(f64, f64)]| pts.iter().filter(|p| near(p)).count() as f64 / pts.len() as f64;
    assert!(close(&corrected) > 0.9, "corrected {}", close(&corrected));
    assert!(close(&raw) < 0.5, "raw {}", close(&raw));

    let estimated = keypoints(&est_out.join("keypoints.csv"), "1");
    assert_eq!(estimated.len(), corrected.len());
    let worst = estimated
        .iter()
        .zip(&corrected)
        .map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1))
        .fold(0.0, f64::max);
    assert!(worst < 0.25, "estimated velocity moves points by up to {worst} m");
}

#[test]
fn localization_of_identical_scans_is_exact() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), SCENE, 8, 2, "sim");
    let scans = sim.join("scans");
    let out = dir.path().join("loc");
    ok(&["localize", "--map", s(&scans), "--query", s(&scans), "--velocity", "truth", "--seed", "1",
         "--estimator", "rigid", "--estimator", "mc+doppler", "--out", s(&out)]);
    let summary = out.join("summary.csv");
    assert_eq!(header(&summary), "estimator,pairs,failures,median_translation,median_rotation_deg");
    for r in rows(&summary) {
        assert_eq!(&r[2], "0");
        assert!(num(&r, 3) < 1e-9 && num(&r, 4) < 1e-9, "{r:?}");
    }
}

#[test]
fn localization_across_opposite_passes_needs_both_corrections() {
    let dir = TempDir::new().unwrap();
    let map = simulate(dir.path(), SCENE, 5, 3, "fwd");
    let query = simulate(dir.path(), REVERSE_SCENE, 6, 3, "rev");
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["localize", "--map", s(&map.join("scans")), "--query", s(&query.join("scans")), "--seed", "2",
             "--estimator", "rigid", "--estimator", "mc", "--estimator", "mc+doppler", "--out", s(&out)]);
        out
    };
    let out = run("loc");
    let medians: Vec<f64> = rows(&out.join("summary.csv")).iter().map(|r| num(r, 3)).collect();
    assert!(medians[2] < medians[1] && medians[1] < medians[0], "{medians:?}");
    assert!(medians[2] < 0.5, "{medians:?}");
    let again = run("loc_again");
    for f in ["localization_mc+doppler.csv", "errors_mc+doppler.csv", "summary.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}
