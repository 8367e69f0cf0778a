use std::f64::consts::TAU;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Rotationally-invariant descriptor built from the geometry of nearby
/// keypoints rather than image intensities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsdConfig {
    /// Number of distance bins in the range histogram.
    pub range_bins: usize,
    /// Neighbourhood radius in metres.
    pub radius: f64,
    /// Angular slices for the azimuth component; 0 disables it.
    pub azimuth_bins: usize,
}

impl Default for RsdConfig {
    fn default() -> Self {
        Self {
            range_bins: 16,
            radius: 20.0,
            azimuth_bins: 0,
        }
    }
}

impl RsdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.range_bins == 0 || !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(
                "RSD needs at least one range bin and a positive radius".into(),
            ));
        }
        Ok(())
    }

    /// Number of histogram bins in a descriptor.
    pub fn descriptor_len(&self) -> usize {
        self.range_bins + self.azimuth_bins
    }
}

/// Below this distance a neighbour is treated as the query itself.
const SELF_DISTANCE: f64 = 1e-9;

/// Descriptor of `query` against `points`.
///
/// The range part is the unit-sum histogram of distances to neighbours
/// within `radius`. The optional azimuth part is the DFT magnitude of the
/// histogram of neighbour bearings, which does not change when the whole
/// scene rotates. With no neighbours the descriptor is all zeros.
pub fn compute_rsd(points: &[Vector2<f64>], query: &Vector2<f64>, cfg: &RsdConfig) -> Vec<f32> {
    let mut range_hist = vec![0.0f64; cfg.range_bins];
    let mut az_hist = vec![0.0f64; cfg.azimuth_bins];
    let mut count = 0usize;
    for p in points {
        let d = p - query;
        let dist = d.norm();
        if dist < SELF_DISTANCE || dist >= cfg.radius {
            continue;
        }
        count += 1;
        let b = ((dist / cfg.radius) * cfg.range_bins as f64) as usize;
        range_hist[b.min(cfg.range_bins - 1)] += 1.0;
        if cfg.azimuth_bins > 0 {
            let a = d.y.atan2(d.x).rem_euclid(TAU);
            let b = ((a / TAU) * cfg.azimuth_bins as f64) as usize;
            az_hist[b.min(cfg.azimuth_bins - 1)] += 1.0;
        }
    }
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    if count == 0 {
        out.resize(cfg.descriptor_len(), 0.0);
        return out;
    }
    let n = count as f64;
    out.extend(range_hist.iter().map(|v| (v / n) as f32));
    let m = cfg.azimuth_bins;
    for k in 0..m {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in az_hist.iter().enumerate() {
            let phase = TAU * (k * j) as f64 / m as f64;
            re += v * phase.cos();
            im -= v * phase.sin();
        }
        out.push(((re * re + im * im).sqrt() / n) as f32);
    }
    out
}

/// Descriptors for every point against all the others.
pub fn compute_rsd_all(points: &[Vector2<f64>], cfg: &RsdConfig) -> Result<Vec<Vec<f32>>> {
    cfg.validate()?;
    Ok(par::map(points, |q| compute_rsd(points, q, cfg)))
}
