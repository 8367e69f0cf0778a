use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::par;

/// Subsequence lengths in metres.
pub const DRIFT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

/// Width of the speed buckets, m/s.
pub const SPEED_BUCKET: f64 = 2.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthDrift {
    pub length: f64,
    pub translational_error_pct: f64,
    pub rotational_error_deg_per_m: f64,
    pub segments: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedDrift {
    /// Lower edge of the bucket; the bucket spans `[speed, speed + 2.5)`.
    pub speed: f64,
    pub translational_error_pct: f64,
    pub rotational_error_deg_per_m: f64,
    pub segments: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Mean over every subsequence of every length.
    pub translational_error_pct: f64,
    pub rotational_error_deg_per_m: f64,
    pub segments: usize,
    pub per_length: Vec<LengthDrift>,
    pub per_speed: Vec<SpeedDrift>,
    /// Set when no subsequence could be evaluated.
    pub notice: Option<String>,
}

struct Segment {
    length: f64,
    speed: f64,
    t_err: f64,
    r_err: f64,
}

fn mean_errors<'a>(segs: impl Iterator<Item = &'a Segment>) -> (f64, f64, usize) {
    let (mut t, mut r, mut n) = (0.0, 0.0, 0usize);
    for s in segs {
        t += s.t_err;
        r += s.r_err;
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0, 0)
    } else {
        (t / n as f64, r / n as f64, n)
    }
}

/// KITTI-style drift of `estimated` against `truth`.
///
/// Every frame starts a subsequence for each length in [`DRIFT_LENGTHS`];
/// it ends at the first frame whose distance along the true path is at
/// least the length further on. The endpoint error `Δ_est⁻¹ Δ_true` gives
/// translation (as % of the nominal length) and rotation (deg per metre).
pub fn kitti_drift(estimated: &Trajectory, truth: &Trajectory) -> Result<DriftReport> {
    if estimated.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "trajectories differ in length: {} vs {}",
            estimated.len(),
            truth.len()
        )));
    }
    let dist = truth.path_distances();
    let times = truth.timestamps();
    let (est, gt) = (estimated.poses(), truth.poses());

    let per_start: Vec<Vec<Segment>> = par::map_range(truth.len(), |i| {
        DRIFT_LENGTHS
            .iter()
            .filter_map(|&len| {
                let j = i + dist[i..].iter().position(|d| *d >= dist[i] + len)?;
                let d_est = est[i].inverse() * est[j];
                let d_gt = gt[i].inverse() * gt[j];
                let err = d_est.inverse() * d_gt;
                Some(Segment {
                    length: len,
                    speed: len / (times[j] - times[i]),
                    t_err: err.translation().norm() / len * 100.0,
                    r_err: err.rotation_angle().to_degrees() / len,
                })
            })
            .collect()
    });
    let segs: Vec<Segment> = per_start.into_iter().flatten().collect();

    let (t, r, n) = mean_errors(segs.iter());
    let per_length = DRIFT_LENGTHS
        .iter()
        .map(|&len| {
            let (t, r, n) = mean_errors(segs.iter().filter(|s| s.length == len));
            LengthDrift {
                length: len,
                translational_error_pct: t,
                rotational_error_deg_per_m: r,
                segments: n,
            }
        })
        .collect();

    let mut buckets: Vec<i64> = segs.iter().map(|s| (s.speed / SPEED_BUCKET).floor() as i64).collect();
    buckets.sort_unstable();
    buckets.dedup();
    let per_speed = buckets
        .into_iter()
        .map(|b| {
            let (t, r, n) = mean_errors(
                segs.iter().filter(|s| (s.speed / SPEED_BUCKET).floor() as i64 == b),
            );
            SpeedDrift {
                speed: b as f64 * SPEED_BUCKET,
                translational_error_pct: t,
                rotational_error_deg_per_m: r,
                segments: n,
            }
        })
        .collect();

    let notice = (n == 0).then(|| {
        format!(
            "path of {:.1} m is shorter than the shortest subsequence ({} m)",
            dist.last().copied().unwrap_or(0.0),
            DRIFT_LENGTHS[0]
        )
    });
    Ok(DriftReport {
        translational_error_pct: t,
        rotational_error_deg_per_m: r,
        segments: n,
        per_length,
        per_speed,
        notice,
    })
}
