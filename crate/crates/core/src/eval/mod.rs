//! Trajectories and error metrics.

mod drift;
mod localization;

pub use drift::{kitti_drift, DriftReport, LengthDrift, SpeedDrift, DRIFT_LENGTHS, SPEED_BUCKET};
pub use localization::{evaluate_localization, Histogram, LocalizationReport};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::Pose;

/// Timestamped sensor poses in a common world frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, poses: Vec<Pose>) -> Result<Self> {
        if timestamps.len() != poses.len() {
            return Err(Error::InvalidInput("one pose per timestamp required".into()));
        }
        if timestamps.iter().any(|t| !t.is_finite()) || timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("trajectory timestamps must increase strictly".into()));
        }
        Ok(Self { timestamps, poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn push(&mut self, timestamp: f64, pose: Pose) -> Result<()> {
        if self.timestamps.last().is_some_and(|t| timestamp <= *t) || !timestamp.is_finite() {
            return Err(Error::InvalidInput("trajectory timestamps must increase strictly".into()));
        }
        self.timestamps.push(timestamp);
        self.poses.push(pose);
        Ok(())
    }

    /// Cumulative distance travelled along the translations.
    pub fn path_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (i, p) in self.poses.iter().enumerate() {
            if i > 0 {
                acc += (p.translation() - self.poses[i - 1].translation()).norm();
            }
            out.push(acc);
        }
        out
    }

    /// `(Δt_k, T_{k-1}⁻¹ T_k)` for consecutive poses.
    pub fn relative_poses(&self) -> Vec<(f64, Pose)> {
        (1..self.len())
            .map(|k| {
                (
                    self.timestamps[k] - self.timestamps[k - 1],
                    self.poses[k - 1].inverse() * self.poses[k],
                )
            })
            .collect()
    }

    /// The same trajectory seen from another world frame.
    pub fn transformed(&self, world: &Pose) -> Self {
        Self {
            timestamps: self.timestamps.clone(),
            poses: self.poses.iter().map(|p| *world * *p).collect(),
        }
    }
}

/// Chain relative motions into a trajectory starting at the identity at
/// `start_time`: `T_k = T_{k-1} · T_rel,k`, where each relative pose is the
/// motion from one frame to the next expressed in the earlier frame.
pub fn compound(start_time: f64, relative: &[(f64, Pose)]) -> Result<Trajectory> {
    let mut traj = Trajectory::new(vec![start_time], vec![Pose::identity()])?;
    let mut t = start_time;
    let mut pose = Pose::identity();
    for (dt, rel) in relative {
        t += dt;
        pose = (pose * *rel).renormalized();
        traj.push(t, pose)?;
    }
    Ok(traj)
}

#[derive(Serialize, Deserialize)]
struct PoseRow {
    timestamp: f64,
    r00: f64,
    r01: f64,
    r02: f64,
    tx: f64,
    r10: f64,
    r11: f64,
    r12: f64,
    ty: f64,
    r20: f64,
    r21: f64,
    r22: f64,
    tz: f64,
}

/// One row per pose: timestamp, then the top 3×4 block row-major.
pub fn write_trajectory_csv(traj: &Trajectory, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (t, p) in traj.timestamps.iter().zip(&traj.poses) {
        let m = p.to_row_major_3x4();
        out.serialize(PoseRow {
            timestamp: *t,
            r00: m[0],
            r01: m[1],
            r02: m[2],
            tx: m[3],
            r10: m[4],
            r11: m[5],
            r12: m[6],
            ty: m[7],
            r20: m[8],
            r21: m[9],
            r22: m[10],
            tz: m[11],
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(r: impl Read) -> Result<Trajectory> {
    let mut input = csv::Reader::from_reader(r);
    let mut traj = Trajectory::default();
    for row in input.deserialize() {
        let row: PoseRow = row?;
        let m = [
            row.r00, row.r01, row.r02, row.tx, row.r10, row.r11, row.r12, row.ty, row.r20,
            row.r21, row.r22, row.tz,
        ];
        traj.push(row.timestamp, Pose::from_row_major_3x4(&m)?)?;
    }
    Ok(traj)
}
