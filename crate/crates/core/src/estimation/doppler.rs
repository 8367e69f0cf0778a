use nalgebra::Vector2;

use super::{mc_ransac, EstimationResult, MeasurementNoise, RansacConfig};
use crate::error::Result;
use crate::features::{Keypoint, MatchSet};

/// Undo the Doppler range shift: each range becomes
/// `r + β (v_x cos φ + v_y sin φ)` for sensor velocity `v`.
pub fn doppler_correct(keypoints: &[Keypoint], v: &Vector2<f64>, beta: f64) -> Vec<Keypoint> {
    keypoints.iter().map(|k| correct_one(k, v, beta)).collect()
}

fn correct_one(k: &Keypoint, v: &Vector2<f64>, beta: f64) -> Keypoint {
    k.with_range(k.range + beta * (v.x * k.azimuth.cos() + v.y * k.azimuth.sin()))
}

/// Both sides of every match corrected with the same sensor velocity.
pub fn doppler_correct_matches(matches: &MatchSet, v: &Vector2<f64>, beta: f64) -> MatchSet {
    matches.map_keypoints(|k, _| correct_one(k, v, beta))
}

/// Motion-compensated RANSAC with the Doppler correction driven by its own
/// velocity estimate.
///
/// Each pass corrects the original matches with the latest velocity and
/// re-estimates, until the velocity settles or the pass budget runs out.
pub fn mc_ransac_doppler(
    matches: &MatchSet,
    cfg: &RansacConfig,
    noise: &MeasurementNoise,
    beta: f64,
) -> Result<EstimationResult> {
    let mut est = mc_ransac(matches, cfg, noise)?;
    let mut elapsed = est.elapsed;
    for _ in 0..cfg.doppler_passes {
        let v = est.velocity.unwrap_or_default().planar_linear();
        let corrected = doppler_correct_matches(matches, &v, beta);
        let next = mc_ransac(&corrected, cfg, noise)?;
        elapsed += next.elapsed;
        let moved = (next.velocity.unwrap_or_default().to_vector()
            - est.velocity.unwrap_or_default().to_vector())
        .norm();
        est = next;
        if moved < cfg.doppler_tolerance {
            break;
        }
    }
    est.elapsed = elapsed;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::testutil::synthetic_matches;
    use crate::se3::BodyVelocity;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn worked_values() {
        let k = [Keypoint::new(0, 0, 0.0, 30.0, 0.0), Keypoint::new(0, 0, 0.0, 30.0, FRAC_PI_2)];
        let same = doppler_correct(&k, &Vector2::zeros(), 0.049);
        assert_eq!(same, k);
        let ahead = doppler_correct(&k, &Vector2::new(1.0, 0.0), 0.049);
        assert!((ahead[0].range - 30.049).abs() < 1e-12);
        let side = doppler_correct(&k, &Vector2::new(0.0, 10.0), 0.049);
        assert!((side[1].range - 30.49).abs() < 1e-12);
        assert!((side[0].range - 30.0).abs() < 1e-12);
        assert_eq!(side[1].azimuth, FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn opposite_velocity_undoes_correction(
            r in 1.0f64..160.0, phi in 0.0f64..std::f64::consts::TAU, vx in -30.0f64..30.0, vy in -30.0f64..30.0,
        ) {
            let k = [Keypoint::new(0, 0, 0.0, r, phi)];
            let v = Vector2::new(vx, vy);
            let there = doppler_correct(&k, &v, 0.049);
            let back = doppler_correct(&there, &(-v), 0.049);
            prop_assert!((back[0].range - r).abs() < 1e-12);
            prop_assert_eq!(back[0].azimuth, phi);
        }
    }

    #[test]
    fn no_motion_means_no_correction() {
        let m = synthetic_matches(&BodyVelocity::zero(), 30, 6, 0.25);
        let cfg = RansacConfig::default();
        let noise = MeasurementNoise::default();
        let a = mc_ransac(&m, &cfg, &noise).unwrap();
        let b = mc_ransac_doppler(&m, &cfg, &noise, 0.049).unwrap();
        assert_eq!(a.transform, b.transform);
        assert_eq!(a.inlier_indices, b.inlier_indices);
    }

    #[test]
    fn removes_injected_shift() {
        // Matches whose ranges carry the shift a moving sensor would see.
        let w = BodyVelocity::planar(20.0, 0.0, 0.2);
        let clean = synthetic_matches(&w, 50, 12, 0.25);
        let v = w.planar_linear();
        let shifted = clean.map_keypoints(|k, _| {
            let mut out = k.with_range(k.range - 0.049 * (v.x * k.azimuth.cos() + v.y * k.azimuth.sin()));
            out.timestamp = k.timestamp;
            out
        });
        let cfg = RansacConfig::default();
        let noise = MeasurementNoise::default();
        let biased = mc_ransac(&shifted, &cfg, &noise).unwrap().velocity.unwrap();
        let fixed = mc_ransac_doppler(&shifted, &cfg, &noise, 0.049).unwrap().velocity.unwrap();
        let err = |e: BodyVelocity| (e.to_vector() - w.to_vector()).norm();
        assert!(err(fixed) < 0.1 * err(biased), "{} vs {}", err(fixed), err(biased));
    }
}
