//! End-to-end drivers: feature extraction, frame-to-frame odometry and
//! compensated scan-to-scan localization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    mc_ransac, mc_ransac_doppler, ransac_rigid, EstimationResult, MeasurementNoise, RansacConfig,
};
use crate::eval::{compound, Trajectory};
use crate::features::{
    describe_orb, describe_rsd, detect_cen2018, match_keypoints, DescribedKeypoints,
    DescriptorKind, DetectorConfig, MatchConfig, MatchSet, OrbConfig, RsdConfig,
};
use crate::par;
use crate::scan::{render_cartesian, Interpolation, PolarScan};
use crate::se3::{BodyVelocity, Pose};
use crate::sim::{derive_seed, undistort_keypoints};

/// Which distortions the estimator accounts for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    /// Rigid alignment of the raw points.
    #[serde(rename = "rigid")]
    Rigid,
    /// Motion compensation.
    #[serde(rename = "mc")]
    Mc,
    /// Motion compensation and Doppler correction.
    #[default]
    #[serde(rename = "mc+doppler")]
    McDoppler,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Rigid, Estimator::Mc, Estimator::McDoppler];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Rigid => "rigid",
            Estimator::Mc => "mc",
            Estimator::McDoppler => "mc+doppler",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator {s:?}; expected rigid, mc or mc+doppler")))
    }
}

/// Detector, descriptor and matcher settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontEndConfig {
    pub detector: DetectorConfig,
    pub descriptor: DescriptorKind,
    pub orb: OrbConfig,
    pub rsd: RsdConfig,
    pub matching: MatchConfig,
    /// Side of the Cartesian image that binary descriptors are computed on.
    pub cartesian_width: usize,
    pub meters_per_pixel: f64,
    pub interpolation: Interpolation,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            descriptor: DescriptorKind::Binary,
            orb: OrbConfig::default(),
            rsd: RsdConfig::default(),
            matching: MatchConfig::default(),
            cartesian_width: 964,
            meters_per_pixel: 0.2592,
            interpolation: Interpolation::Bilinear,
        }
    }
}

/// Detect and describe the keypoints of one scan.
pub fn extract_features(scan: &PolarScan, cfg: &FrontEndConfig) -> Result<DescribedKeypoints> {
    let keypoints = detect_cen2018(scan, &cfg.detector)?;
    match cfg.descriptor {
        DescriptorKind::Binary => {
            let image = render_cartesian(scan, cfg.cartesian_width, cfg.meters_per_pixel, cfg.interpolation)?;
            describe_orb(&keypoints, &image, &cfg.orb)
        }
        DescriptorKind::Rsd => describe_rsd(&keypoints, &cfg.rsd),
    }
}

/// Detected, described and matched keypoints of two scans.
pub fn match_scans(
    first: &DescribedKeypoints,
    second: &DescribedKeypoints,
    reference_times: (f64, f64),
    cfg: &FrontEndConfig,
) -> Result<MatchSet> {
    match_keypoints(first, second, reference_times, &cfg.matching)
}

/// Motion between the reference times of a match set with the chosen
/// estimator. `beta` is only used with Doppler correction.
pub fn estimate_motion(
    matches: &MatchSet,
    estimator: Estimator,
    ransac: &RansacConfig,
    noise: &MeasurementNoise,
    beta: f64,
) -> Result<EstimationResult> {
    match estimator {
        Estimator::Rigid => ransac_rigid(matches, ransac),
        Estimator::Mc => mc_ransac(matches, ransac, noise),
        Estimator::McDoppler => mc_ransac_doppler(matches, ransac, noise, beta),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryConfig {
    pub front_end: FrontEndConfig,
    pub estimator: Estimator,
    pub ransac: RansacConfig,
    pub noise: MeasurementNoise,
    /// Master seed; each pair uses its own stream derived from it.
    pub seed: u64,
}


/// Outcome of one consecutive scan pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Index of the first scan of the pair.
    pub index: usize,
    pub t1: f64,
    pub t2: f64,
    pub matches: usize,
    /// Relative pose used for compounding; the identity when estimation
    /// failed.
    pub transform: Pose,
    pub velocity: Option<BodyVelocity>,
    pub inliers: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub elapsed: f64,
}

#[derive(Clone, Debug)]
pub struct OdometryOutput {
    pub trajectory: Trajectory,
    pub pairs: Vec<PairRecord>,
    pub failures: usize,
}

/// Frame-to-frame odometry over an ordered scan sequence.
///
/// A pair whose estimation fails contributes the identity and is counted in
/// [`OdometryOutput::failures`]; the sequence carries on.
pub fn run_odometry(scans: &[PolarScan], cfg: &OdometryConfig) -> Result<OdometryOutput> {
    if scans.len() < 2 {
        return Err(Error::InvalidInput(format!("odometry needs at least 2 scans, got {}", scans.len())));
    }
    cfg.ransac.validate()?;
    cfg.noise.validate()?;
    let times: Vec<f64> = scans.iter().map(PolarScan::reference_time).collect();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("scans must be in increasing time order".into()));
    }

    let features: Vec<DescribedKeypoints> = par::map(scans, |s| extract_features(s, &cfg.front_end))
        .into_iter()
        .collect::<Result<_>>()?;

    let pairs: Vec<PairRecord> = par::map_range(scans.len() - 1, |k| {
        let (t1, t2) = (times[k], times[k + 1]);
        let ransac = RansacConfig { seed: derive_seed(cfg.seed, k as u64), ..cfg.ransac.clone() };
        let beta = scans[k].config().beta;
        let outcome = match_scans(&features[k], &features[k + 1], (t1, t2), &cfg.front_end)
            .and_then(|m| Ok((m.len(), estimate_motion(&m, cfg.estimator, &ransac, &cfg.noise, beta)?)));
        match outcome {
            Ok((matches, est)) => PairRecord {
                index: k,
                t1,
                t2,
                matches,
                transform: est.transform,
                velocity: est.velocity,
                inliers: est.inlier_count(),
                converged: est.converged,
                failure: None,
                elapsed: est.elapsed,
            },
            Err(e) => PairRecord {
                index: k,
                t1,
                t2,
                matches: 0,
                transform: Pose::identity(),
                velocity: None,
                inliers: 0,
                converged: false,
                failure: Some(e.to_string()),
                elapsed: 0.0,
            },
        }
    });

    let relative: Vec<(f64, Pose)> = pairs.iter().map(|p| (p.t2 - p.t1, p.transform)).collect();
    let trajectory = compound(times[0], &relative)?;
    for p in &pairs {
        if let Some(why) = &p.failure {
            log::warn!("pair {} ({} to {}): {why}; using the identity", p.index, p.t1, p.t2);
        }
    }
    let failures = pairs.iter().filter(|p| p.failure.is_some()).count();
    Ok(OdometryOutput { trajectory, pairs, failures })
}

/// Keypoints of both sides re-expressed at their scan reference times.
///
/// The first side uses velocity `v1`, the second `v2`. With `Mc` only the
/// motion distortion is removed; with `McDoppler` ranges are Doppler
/// corrected first. `Rigid` returns the matches unchanged.
pub fn compensate_matches(
    matches: &MatchSet,
    v1: &BodyVelocity,
    v2: &BodyVelocity,
    variant: Estimator,
    beta: f64,
) -> MatchSet {
    let doppler = match variant {
        Estimator::Rigid => return matches.clone(),
        Estimator::Mc => None,
        Estimator::McDoppler => Some(beta),
    };
    let (r1, r2) = matches.reference_times;
    matches.map_keypoints(|k, second| {
        let (v, t) = if second { (v2, r2) } else { (v1, r1) };
        undistort_keypoints(std::slice::from_ref(k), v, t, doppler)[0]
    })
}

/// Pose of the second scan's reference frame in the first, from matches
/// between scans whose own velocities are `v1` and `v2`.
///
/// Each scan is compensated with its own velocity, then the two point sets
/// are aligned rigidly. Scans of opposite travel directions see opposite
/// Doppler shifts, so unlike odometry this cannot rely on one velocity.
pub fn localize_pair(
    matches: &MatchSet,
    v1: &BodyVelocity,
    v2: &BodyVelocity,
    variant: Estimator,
    ransac: &RansacConfig,
    beta: f64,
) -> Result<EstimationResult> {
    let compensated = compensate_matches(matches, v1, v2, variant, beta);
    let mut est = ransac_rigid(&compensated, ransac)?;
    if variant != Estimator::Rigid {
        est.velocity = Some(*v2);
    }
    Ok(est)
}

/// Body velocity of a scan from its matches against the following scan.
/// With `doppler` the ranges are corrected inside the estimate.
pub fn scan_velocity(
    matches: &MatchSet,
    doppler: bool,
    ransac: &RansacConfig,
    noise: &MeasurementNoise,
    beta: f64,
) -> Result<BodyVelocity> {
    let est = if doppler {
        mc_ransac_doppler(matches, ransac, noise, beta)?
    } else {
        mc_ransac(matches, ransac, noise)?
    };
    est.velocity
        .ok_or_else(|| Error::Ransac("estimator returned no velocity".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::RadarConfig;
    use crate::se3::velocity_to_transform;
    use crate::sim::{simulate_sequence, true_matches, ReturnPositions, SceneGenerator, SimOptions, SimScene};

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.to_string().parse::<Estimator>().unwrap(), e);
            let toml = format!("{:?}", e.name());
            assert_eq!(toml.trim_matches('"'), e.name());
        }
        assert!("doppler".parse::<Estimator>().is_err());
    }

    #[test]
    fn odometry_needs_two_scans() {
        let scan = PolarScan::zeros(RadarConfig::small(16, 32), 0.0).unwrap();
        let err = run_odometry(&[scan], &OdometryConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn empty_scans_fall_back_to_identity() {
        let cfg = RadarConfig::small(64, 128);
        let scans: Vec<PolarScan> = (0..3)
            .map(|k| PolarScan::zeros(cfg.clone(), k as f64 * 0.25).unwrap())
            .collect();
        let out = run_odometry(&scans, &OdometryConfig::default()).unwrap();
        assert_eq!(out.failures, 2);
        assert!(out.trajectory.poses().iter().all(|p| *p == Pose::identity()));
        assert_eq!(out.trajectory.timestamps(), &[0.0, 0.25, 0.5]);
    }

    fn scene(v: BodyVelocity) -> SimScene {
        SimScene::new(SceneGenerator::with_seed(2).landmarks().unwrap(), v)
    }

    #[test]
    fn compensation_recovers_static_geometry() {
        let cfg = RadarConfig::default();
        let w = BodyVelocity::planar(15.0, 0.0, 0.4);
        let scans = simulate_sequence(&scene(w), &cfg, &SimOptions::default(), 2, 1).unwrap();
        let m = true_matches(&scans[0], &scans[1], ReturnPositions::Exact);
        let truth = velocity_to_transform(&w, cfg.rotation_period());
        let rc = RansacConfig::default();
        let err = |e: Estimator| {
            let est = localize_pair(&m, &w, &w, e, &rc, cfg.beta).unwrap();
            (est.transform.inverse() * truth).translation().norm()
        };
        let full = err(Estimator::McDoppler);
        assert!(full < 1e-6, "{full}");
        // Consecutive scans warp alike, so rigid alignment is only mildly off.
        assert!(err(Estimator::Rigid) > 1e3 * full.max(1e-9));
    }

    #[test]
    fn zero_velocity_compensation_is_a_no_op_on_positions() {
        let cfg = RadarConfig::default();
        let scans = simulate_sequence(&scene(BodyVelocity::zero()), &cfg, &SimOptions::default(), 2, 1).unwrap();
        let m = true_matches(&scans[0], &scans[1], ReturnPositions::Exact);
        let c = compensate_matches(&m, &BodyVelocity::zero(), &BodyVelocity::zero(), Estimator::McDoppler, cfg.beta);
        for (a, b) in m.pairs.iter().zip(&c.pairs) {
            assert!((a.first.cartesian - b.first.cartesian).norm() < 1e-9);
            assert!((a.second.cartesian - b.second.cartesian).norm() < 1e-9);
        }
    }
}
