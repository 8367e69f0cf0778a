//! Synthetic spinning-radar scans with exact ground truth.
//!
//! Every azimuth is sampled from the sensor pose at its own timestamp, so a
//! moving sensor produces motion-distorted scans, and with Doppler enabled
//! each return is shifted by `-β u` where `u` is the closing speed.

mod scene;
mod undistort;

pub use scene::{Landmark, SceneFile, SceneGenerator, SimNoise, SimScene};
pub use undistort::{doppler_corrected_range, undistort_keypoints, undistort_scan};

use std::f64::consts::TAU;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{Keypoint, MatchSet};
use crate::par;
use crate::scan::{cartesian_to_polar_point, PolarScan, RadarConfig};
use crate::se3::{velocity_to_transform, wrap_pi, BodyVelocity, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Shift every return by the Doppler range error.
    pub doppler: bool,
    /// Sample each azimuth at its own time; otherwise every azimuth sees the
    /// scene as it is at the scan start.
    pub distortion: bool,
    /// Gaussian width of a return along range, in bins. Zero deposits all
    /// power in the nearest bin.
    pub range_spread_bins: f64,
    /// Also spread each return over neighbouring azimuths according to the
    /// beamwidth.
    pub beam_spread: bool,
    /// Landmarks closer than this are not observed.
    pub min_range: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            doppler: true,
            distortion: true,
            range_spread_bins: 1.5,
            beam_spread: false,
            min_range: 2.0,
        }
    }
}

impl SimOptions {
    pub fn ideal() -> Self {
        Self {
            doppler: false,
            distortion: false,
            ..Self::default()
        }
    }

    pub fn with_effects(doppler: bool, distortion: bool) -> Self {
        Self {
            doppler,
            distortion,
            ..Self::default()
        }
    }
}

/// One landmark as seen in one scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimReturn {
    pub landmark: usize,
    /// Azimuth that captured the landmark.
    pub azimuth_index: usize,
    /// Timestamp of that azimuth.
    pub time: f64,
    /// Instant whose sensor pose was used: `time` with distortion, the scan
    /// start without.
    pub pose_time: f64,
    /// Exact landmark position in the sensor frame at `pose_time`.
    pub point: Vector2<f64>,
    pub range: f64,
    /// Range written into the scan, after Doppler shift and jitter.
    pub apparent_range: f64,
    /// Exact bearing in `[0, 2π)`.
    pub bearing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimScan {
    pub scan: PolarScan,
    pub returns: Vec<SimReturn>,
    /// Sensor pose at the scan reference time.
    pub pose: Pose,
}

impl SimScan {
    pub fn reference_time(&self) -> f64 {
        self.scan.reference_time()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimScanPair {
    pub first: SimScan,
    pub second: SimScan,
    pub true_velocity: BodyVelocity,
    /// Motion of the sensor from the first reference time to the second,
    /// i.e. the pose of the second reference frame in the first.
    pub true_transform: Pose,
}

impl SimScanPair {
    pub fn reference_times(&self) -> (f64, f64) {
        (self.first.reference_time(), self.second.reference_time())
    }
}

/// Independent stream `k` of a master seed.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sensor pose (sensor to inertial) at `t`.
pub fn sensor_pose(scene: &SimScene, t: f64) -> Pose {
    scene.start_pose * velocity_to_transform(&scene.velocity, t - scene.start_time)
}

/// Which returns each landmark produces in the scan starting at
/// `start_time`, before rendering.
pub fn simulate_returns(
    scene: &SimScene,
    cfg: &RadarConfig,
    start_time: f64,
    opts: &SimOptions,
    rng: &mut impl Rng,
) -> Result<Vec<SimReturn>> {
    scene.validate()?;
    cfg.validate()?;
    let times = cfg.azimuth_times(start_time);
    let angles = cfg.uniform_azimuth_angles();
    let n_az = times.len();
    let pose_time = |a: usize| if opts.distortion { times[a] } else { start_time };
    let inverse_poses: Vec<Pose> = if opts.distortion {
        par::map(&times, |t| sensor_pose(scene, *t).inverse())
    } else {
        vec![sensor_pose(scene, start_time).inverse()]
    };
    let inv = |a: usize| &inverse_poses[if opts.distortion { a } else { 0 }];
    let sensor_frame = |l: &scene::Landmark, a: usize| {
        let t = pose_time(a);
        inv(a).transform_planar(&l.position_after(t - scene.start_time))
    };

    let res = cfg.range_resolution;
    let max_range = cfg.max_range() - 4.0 * opts.range_spread_bins.max(0.5) * res;
    let jitter = Normal::new(0.0, scene.noise.range_sigma.max(0.0))
        .map_err(|e| crate::Error::InvalidInput(e.to_string()))?;

    let mut out = Vec::new();
    for (id, l) in scene.landmarks.iter().enumerate() {
        let capture = if opts.distortion {
            (0..n_az)
                .map(|a| {
                    let q = sensor_frame(l, a);
                    (a, wrap_pi(q.y.atan2(q.x) - angles[a]).abs())
                })
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .map(|(a, _)| a)
        } else {
            let q = sensor_frame(l, 0);
            let b = q.y.atan2(q.x).rem_euclid(TAU);
            Some(((b / cfg.azimuth_step()).round() as usize) % n_az)
        };
        let Some(a) = capture else { continue };
        // Draw the noise for every landmark so one dropout does not shift
        // the stream seen by the others.
        let dropped = rng.random::<f64>() < scene.noise.dropout;
        let jitter = if scene.noise.range_sigma > 0.0 { jitter.sample(rng) } else { 0.0 };

        let q = sensor_frame(l, a);
        let Ok((range, bearing)) = cartesian_to_polar_point(&q) else { continue };
        if dropped || range < opts.min_range || range > max_range {
            continue;
        }
        let mut apparent = range + jitter;
        if opts.doppler {
            let rot = inv(a).rotation();
            let lm_vel = l.velocity.map_or(Vector2::zeros(), |v| {
                (rot * nalgebra::Vector3::new(v.x, v.y, 0.0)).xy()
            });
            let closing = (scene.velocity.planar_linear() - lm_vel).dot(&(q / range));
            apparent -= cfg.beta * closing;
        }
        out.push(SimReturn {
            landmark: id,
            azimuth_index: a,
            time: times[a],
            pose_time: pose_time(a),
            point: q,
            range,
            apparent_range: apparent,
            bearing,
        });
    }
    Ok(out)
}

/// Deposit `returns` into an empty scan and add background noise.
pub fn render_returns(
    returns: &[SimReturn],
    scene: &SimScene,
    cfg: &RadarConfig,
    start_time: f64,
    opts: &SimOptions,
    rng: &mut impl Rng,
) -> Result<PolarScan> {
    let n_az = cfg.azimuths_per_rotation;
    let bins = cfg.range_bins;
    let mut power = vec![0.0f32; n_az * bins];
    let step = cfg.azimuth_step();
    let beam_sigma = cfg.beamwidth / (8.0 * 2f64.ln()).sqrt();
    let spread = opts.range_spread_bins;

    for r in returns {
        let refl = scene.landmarks[r.landmark].reflectivity;
        let rho = r.apparent_range / cfg.range_resolution;
        let offset = wrap_pi(r.bearing - step * r.azimuth_index as f64);
        let beam: Vec<(usize, f64)> = if opts.beam_spread && beam_sigma > 0.0 {
            let k = (3.0 * beam_sigma / step).ceil() as isize;
            (-k..=k)
                .map(|d| {
                    let a = (r.azimuth_index as isize + d).rem_euclid(n_az as isize) as usize;
                    let off = offset - d as f64 * step;
                    (a, (-0.5 * (off / beam_sigma).powi(2)).exp())
                })
                .filter(|(_, g)| *g > 1e-3)
                .collect()
        } else {
            vec![(r.azimuth_index, 1.0)]
        };
        for (a, gain) in beam {
            let row = &mut power[a * bins..(a + 1) * bins];
            if spread > 0.0 {
                let lo = (rho - 4.0 * spread).floor().max(0.0) as usize;
                let hi = ((rho + 4.0 * spread).ceil() as usize).min(bins - 1);
                for (i, cell) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let z = (i as f64 - rho) / spread;
                    *cell += (refl * gain * (-0.5 * z * z).exp()) as f32;
                }
            } else {
                let i = rho.round();
                if i >= 0.0 && (i as usize) < bins {
                    row[i as usize] += (refl * gain) as f32;
                }
            }
        }
    }

    let floor = scene.noise.floor_sigma;
    if floor > 0.0 {
        for cell in power.iter_mut() {
            let u: f64 = 1.0 - rng.random::<f64>();
            *cell += (floor * (-2.0 * u.ln()).sqrt()) as f32;
        }
    }
    PolarScan::uniform(cfg.clone(), start_time, power)
}

/// One rotation starting at `start_time`.
pub fn simulate_scan(
    scene: &SimScene,
    cfg: &RadarConfig,
    start_time: f64,
    opts: &SimOptions,
    seed: u64,
) -> Result<SimScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let returns = simulate_returns(scene, cfg, start_time, opts, &mut rng)?;
    let scan = render_returns(&returns, scene, cfg, start_time, opts, &mut rng)?;
    Ok(SimScan {
        scan,
        returns,
        pose: sensor_pose(scene, start_time),
    })
}

/// Two consecutive rotations, the second starting one period after the
/// scene start.
pub fn simulate_pair(
    scene: &SimScene,
    cfg: &RadarConfig,
    opts: &SimOptions,
    seed: u64,
) -> Result<SimScanPair> {
    let t0 = scene.start_time;
    let period = cfg.rotation_period();
    let first = simulate_scan(scene, cfg, t0, opts, derive_seed(seed, 0))?;
    let second = simulate_scan(scene, cfg, t0 + period, opts, derive_seed(seed, 1))?;
    Ok(SimScanPair {
        first,
        second,
        true_velocity: scene.velocity,
        true_transform: velocity_to_transform(&scene.velocity, period),
    })
}

/// `frames` back-to-back rotations, simulated in parallel.
pub fn simulate_sequence(
    scene: &SimScene,
    cfg: &RadarConfig,
    opts: &SimOptions,
    frames: usize,
    seed: u64,
) -> Result<Vec<SimScan>> {
    let period = cfg.rotation_period();
    par::map_range(frames, |k| {
        simulate_scan(
            scene,
            cfg,
            scene.start_time + k as f64 * period,
            opts,
            derive_seed(seed, k as u64),
        )
    })
    .into_iter()
    .collect()
}

/// How ground-truth correspondences place their keypoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnPositions {
    /// Exact bearing and apparent range.
    Exact,
    /// Range rounded to a bin and bearing snapped to the azimuth, as a
    /// detector would report them.
    Quantized,
}

/// Keypoint for a simulated return.
pub fn return_keypoint(r: &SimReturn, cfg: &RadarConfig, positions: ReturnPositions) -> Keypoint {
    let res = cfg.range_resolution;
    let bin = (r.apparent_range / res).round().max(0.0) as usize;
    match positions {
        ReturnPositions::Exact => Keypoint::new(r.azimuth_index, bin, r.pose_time, r.apparent_range, r.bearing),
        ReturnPositions::Quantized => Keypoint::new(
            r.azimuth_index,
            bin,
            r.pose_time,
            bin as f64 * res,
            r.azimuth_index as f64 * cfg.azimuth_step(),
        ),
    }
}

/// Correspondences between the landmarks seen in both scans.
pub fn true_matches(first: &SimScan, second: &SimScan, positions: ReturnPositions) -> MatchSet {
    let cfg = first.scan.config();
    let mut j = 0;
    let mut pairs = Vec::new();
    for r1 in &first.returns {
        while j < second.returns.len() && second.returns[j].landmark < r1.landmark {
            j += 1;
        }
        if let Some(r2) = second.returns.get(j).filter(|r| r.landmark == r1.landmark) {
            pairs.push((return_keypoint(r1, cfg, positions), return_keypoint(r2, cfg, positions)));
        }
    }
    MatchSet::from_keypoints(pairs, (first.reference_time(), second.reference_time()))
}
