//! Scan-to-scan motion estimation from keypoint matches.
//!
//! Conventions: a [`MatchSet`] pairs a point seen in scan 1 with the same
//! landmark seen in scan 2, each in the sensor frame at its own observation
//! time. [`EstimationResult::transform`] is the motion of the sensor from the
//! first reference time to the second (the pose of the second reference
//! frame in the first), and velocities are the sensor's own body velocity.
//! A point observed at `t1` is predicted at `t2` by
//! `velocity_to_transform(w, -(t2 - t1))`.

mod doppler;
mod gauss_newton;
mod rigid;

pub use doppler::{doppler_correct, doppler_correct_matches, mc_ransac_doppler};
pub use gauss_newton::{
    gauss_newton_velocity, mc_predict, mc_residual, planar_jacobian, point_jacobian, velocity_cost,
    GnOutcome, GnSettings,
};
pub use rigid::{align_rigid_svd, ransac_rigid};

use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::par;
use crate::se3::{velocity_to_transform, BodyVelocity, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Inlier distance in metres.
    pub inlier_threshold: f64,
    /// Points per hypothesis; scans are planar, so always 2.
    pub subset_size: usize,
    pub seed: u64,
    /// Gauss-Newton budget per hypothesis.
    pub gn_max_iters: usize,
    /// Gauss-Newton budget for the final refit on the inlier set.
    pub gn_final_iters: usize,
    /// Stop once the update norm drops below this.
    pub gn_tolerance: f64,
    /// Doppler/velocity fixed-point passes.
    pub doppler_passes: usize,
    /// Stop the fixed point once the velocity moves less than this (m/s).
    pub doppler_tolerance: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            inlier_threshold: 0.35,
            subset_size: 2,
            seed: 0,
            gn_max_iters: 10,
            gn_final_iters: 20,
            gn_tolerance: 1e-10,
            doppler_passes: 3,
            doppler_tolerance: 1e-6,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subset_size != 2 {
            return Err(Error::InvalidInput("subset_size must be 2 for planar scans".into()));
        }
        if !(self.inlier_threshold > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "RANSAC needs a positive threshold and at least one iteration".into(),
            ));
        }
        if !(self.gn_tolerance >= 0.0) || self.gn_max_iters == 0 || self.gn_final_iters == 0 {
            return Err(Error::InvalidInput("invalid Gauss-Newton settings".into()));
        }
        Ok(())
    }

    pub(crate) fn hypothesis_gn(&self) -> GnSettings {
        GnSettings { max_iters: self.gn_max_iters, tolerance: self.gn_tolerance }
    }

    pub(crate) fn final_gn(&self) -> GnSettings {
        GnSettings { max_iters: self.gn_final_iters, tolerance: self.gn_tolerance }
    }
}

/// Covariance of a matched point in scan 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasurementNoise {
    /// `σ² I` in Cartesian coordinates.
    Isotropic { sigma: f64 },
    /// Independent range and azimuth noise, propagated to Cartesian
    /// coordinates through the polar Jacobian `H`: `R_cart = H R Hᵀ`.
    Polar { range_sigma: f64, azimuth_sigma: f64 },
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        MeasurementNoise::Isotropic { sigma: 0.0432 }
    }
}

impl MeasurementNoise {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MeasurementNoise::Isotropic { sigma } => sigma > 0.0 && sigma.is_finite(),
            MeasurementNoise::Polar { range_sigma, azimuth_sigma } => {
                range_sigma > 0.0
                    && azimuth_sigma > 0.0
                    && range_sigma.is_finite()
                    && azimuth_sigma.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("noise standard deviations must be positive".into()))
        }
    }

    /// Cartesian covariance at point `p`.
    pub fn cartesian_covariance(&self, p: &Vector2<f64>) -> Matrix2<f64> {
        match *self {
            MeasurementNoise::Isotropic { sigma } => Matrix2::identity() * sigma * sigma,
            MeasurementNoise::Polar { range_sigma, azimuth_sigma } => {
                let r = p.norm();
                let (s, c) = p.y.atan2(p.x).sin_cos();
                let h = Matrix2::new(c, -r * s, s, r * c);
                let polar = Matrix2::new(range_sigma * range_sigma, 0.0, 0.0, azimuth_sigma * azimuth_sigma);
                h * polar * h.transpose()
            }
        }
    }

    /// Inverse covariance at `p`. A point at the sensor origin has no
    /// azimuth information, so only its range term is kept there.
    pub fn information(&self, p: &Vector2<f64>) -> Matrix2<f64> {
        let cov = self.cartesian_covariance(p);
        cov.try_inverse().unwrap_or_else(|| {
            let var = cov.trace().max(f64::MIN_POSITIVE);
            Matrix2::identity() / var
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub transform: Pose,
    /// Estimated body velocity; `None` for rigid estimates.
    pub velocity: Option<BodyVelocity>,
    pub inlier_indices: Vec<usize>,
    /// Gauss-Newton iterations of the final refit (0 for rigid).
    pub iterations_used: usize,
    pub converged: bool,
    /// Wall-clock time spent estimating, seconds.
    pub elapsed: f64,
}

impl EstimationResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_indices.len()
    }
}

/// Score of one hypothesis: inlier indices and their summed squared error.
#[derive(Clone, Debug)]
pub(crate) struct Hypothesis<M> {
    pub model: M,
    pub inliers: Vec<usize>,
    pub sse: f64,
}

/// Random 2-subsets drawn up front so that the hypotheses can be evaluated
/// in any order.
pub(crate) fn draw_subsets(m: usize, cfg: &RansacConfig) -> Vec<[usize; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.max_iterations)
        .map(|_| {
            let s = index::sample(&mut rng, m, 2);
            [s.index(0), s.index(1)]
        })
        .collect()
}

/// Best hypothesis: most inliers, then lowest error, then earliest.
pub(crate) fn select_best<M>(hyps: Vec<Option<Hypothesis<M>>>) -> Option<Hypothesis<M>> {
    let mut best: Option<Hypothesis<M>> = None;
    for h in hyps.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some(b) => {
                h.inliers.len() > b.inliers.len()
                    || (h.inliers.len() == b.inliers.len() && h.sse < b.sse)
            }
        };
        if better {
            best = Some(h);
        }
    }
    best
}

/// Inliers of a residual function, with their summed squared residual.
pub(crate) fn score(
    m: usize,
    threshold: f64,
    residual: impl Fn(usize) -> f64,
) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut sse = 0.0;
    for i in 0..m {
        let r = residual(i);
        if r < threshold {
            inliers.push(i);
            sse += r * r;
        }
    }
    (inliers, sse)
}

pub(crate) fn check_matches(matches: &MatchSet) -> Result<()> {
    if matches.len() < 2 {
        return Err(Error::Ransac(format!("need at least 2 matches, got {}", matches.len())));
    }
    Ok(())
}

/// Motion-compensated RANSAC: every hypothesis is a constant body velocity
/// fitted to two matches, scored by predicting each scan-1 point forward
/// by its own time gap.
pub fn mc_ransac(
    matches: &MatchSet,
    cfg: &RansacConfig,
    noise: &MeasurementNoise,
) -> Result<EstimationResult> {
    let start = Instant::now();
    cfg.validate()?;
    noise.validate()?;
    check_matches(matches)?;
    let m = matches.len();
    let subsets = draw_subsets(m, cfg);
    let hyp_gn = cfg.hypothesis_gn();
    let hyps = par::map(&subsets, |s| {
        let fit = gauss_newton_velocity(matches, s, noise, &hyp_gn, &BodyVelocity::zero()).ok()?;
        let (inliers, sse) = score(m, cfg.inlier_threshold, |i| {
            mc_residual(matches, i, &fit.velocity).norm()
        });
        Some(Hypothesis { model: fit.velocity, inliers, sse })
    });
    let best = select_best(hyps)
        .filter(|h| h.inliers.len() >= cfg.subset_size)
        .ok_or_else(|| Error::Ransac("no hypothesis reached the minimum inlier count".into()))?;

    let refit = gauss_newton_velocity(matches, &best.inliers, noise, &cfg.final_gn(), &best.model)?;
    Ok(EstimationResult {
        transform: velocity_to_transform(&refit.velocity, matches.reference_dt()),
        velocity: Some(refit.velocity),
        inlier_indices: best.inliers,
        iterations_used: refit.iterations,
        converged: refit.converged,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
