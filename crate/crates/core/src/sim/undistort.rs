use crate::error::{Error, Result};
use crate::features::Keypoint;
use crate::par;
use crate::scan::{cartesian_to_polar_point, polar_to_cartesian_point, PolarScan};
use crate::scan::AzimuthLookup;
use crate::se3::{velocity_to_transform, BodyVelocity};

/// Range with the Doppler shift of a return at `azimuth` removed:
/// `r + β (v_x cos φ + v_y sin φ)`.
pub fn doppler_corrected_range(range: f64, azimuth: f64, w: &BodyVelocity, beta: f64) -> f64 {
    let v = w.planar_linear();
    range + beta * (v.x * azimuth.cos() + v.y * azimuth.sin())
}

/// Re-express keypoints in the sensor frame at `reference_time`, assuming
/// the sensor moved with constant body velocity `w`. With `doppler_beta`
/// each range is corrected before the point is moved.
pub fn undistort_keypoints(
    keypoints: &[Keypoint],
    w: &BodyVelocity,
    reference_time: f64,
    doppler_beta: Option<f64>,
) -> Vec<Keypoint> {
    keypoints
        .iter()
        .map(|k| {
            let range = match doppler_beta {
                Some(beta) => doppler_corrected_range(k.range, k.azimuth, w, beta),
                None => k.range,
            };
            let p = polar_to_cartesian_point(range, k.azimuth);
            let moved = velocity_to_transform(w, k.timestamp - reference_time).transform_planar(&p);
            k.relocated(moved, reference_time)
        })
        .collect()
}

/// Resample a whole scan as if every azimuth had been captured at
/// `reference_time`.
///
/// Each cell is moved to where it would have been seen from the reference
/// pose and written into the nearest output cell, keeping the maximum when
/// several land together. The output keeps the input's azimuth angles and
/// timestamps; only the power is remapped.
pub fn undistort_scan(
    scan: &PolarScan,
    w: &BodyVelocity,
    reference_time: f64,
    doppler: bool,
) -> Result<PolarScan> {
    if !w.is_finite() || !reference_time.is_finite() {
        return Err(Error::InvalidInput("velocity and reference time must be finite".into()));
    }
    let cfg = scan.config();
    let bins = scan.num_range_bins();
    let n_az = scan.num_azimuths();
    let lookup = AzimuthLookup::new(scan.azimuth_angles());
    let beta = cfg.beta;

    let moves: Vec<Vec<(usize, f32)>> = par::map_range(n_az, |a| {
        let angle = scan.azimuth_angles()[a];
        let t = velocity_to_transform(w, scan.azimuth_timestamps()[a] - reference_time);
        let row = scan.row(a);
        let mut out = Vec::new();
        for (i, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut r = scan.range_of_bin(i);
            if doppler {
                r = doppler_corrected_range(r, angle, w, beta);
            }
            let p = t.transform_planar(&polar_to_cartesian_point(r, angle));
            let Ok((r2, az2)) = cartesian_to_polar_point(&p) else {
                continue;
            };
            let bin = (r2 / cfg.range_resolution).round();
            if bin < 0.0 || bin as usize >= bins {
                continue;
            }
            let (k, frac) = lookup.locate(az2);
            let a2 = if frac < 0.5 { k } else { (k + 1) % n_az };
            out.push((a2 * bins + bin as usize, v));
        }
        out
    });

    let mut power = vec![0.0f32; n_az * bins];
    for (idx, v) in moves.into_iter().flatten() {
        if v > power[idx] {
            power[idx] = v;
        }
    }
    PolarScan::new(
        cfg.clone(),
        scan.azimuth_angles().to_vec(),
        scan.azimuth_timestamps().to_vec(),
        power,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::RadarConfig;
    use crate::sim::{simulate_scan, Landmark, SceneGenerator, SimOptions, SimScene};

    #[test]
    fn zero_velocity_is_identity() {
        let cfg = RadarConfig::default();
        let scene = SimScene::new(SceneGenerator::with_seed(3).landmarks().unwrap(), BodyVelocity::zero());
        let s = simulate_scan(&scene, &cfg, 0.0, &SimOptions::ideal(), 0).unwrap();
        let out = undistort_scan(&s.scan, &BodyVelocity::zero(), 0.0, true).unwrap();
        assert_eq!(out, s.scan);

        let kps = [Keypoint::new(1, 2, 0.3, 12.0, 1.0)];
        let moved = undistort_keypoints(&kps, &BodyVelocity::zero(), 0.0, Some(0.049));
        assert!((moved[0].cartesian - kps[0].cartesian).norm() < 1e-12);
    }

    #[test]
    fn doppler_correction_adds_shift_ahead() {
        let w = BodyVelocity::planar(1.0, 0.0, 0.0);
        assert!((doppler_corrected_range(49.952, 0.0, &w, 0.049) - 50.001).abs() < 1e-12);
        assert!((doppler_corrected_range(10.0, std::f64::consts::FRAC_PI_2, &w, 0.049) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn scan_resampling_moves_a_return_to_its_ideal_cell() {
        let cfg = RadarConfig::default();
        let mut scene = SimScene::new(vec![Landmark::fixed(-25.0, 10.0, 1.0)], BodyVelocity::planar(15.0, 0.0, 0.5));
        scene.start_time = 0.0;
        let opts = SimOptions { range_spread_bins: 0.0, ..Default::default() };
        let distorted = simulate_scan(&scene, &cfg, 0.0, &opts, 0).unwrap();
        let ideal = simulate_scan(&scene, &cfg, 0.0, &SimOptions { range_spread_bins: 0.0, ..SimOptions::ideal() }, 0).unwrap();
        let fixed = undistort_scan(&distorted.scan, &scene.velocity, 0.0, true).unwrap();
        let r = &ideal.returns[0];
        let bin = (r.apparent_range / cfg.range_resolution).round() as usize;
        let near: f32 = (r.azimuth_index.saturating_sub(1)..=r.azimuth_index + 1)
            .flat_map(|a| (bin - 1..=bin + 1).map(move |i| (a, i)))
            .map(|(a, i)| fixed.at(a, i))
            .sum();
        assert_eq!(near, 1.0);
    }
}
