use std::io::Write;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scan::{cartesian_to_polar_point, polar_to_cartesian_point, PolarScan};

/// A detected point in one scan.
///
/// `cartesian` is always `polar_to_cartesian_point(range, azimuth)`;
/// the constructors keep the two representations in sync.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    /// Row of the source scan, kept for bookkeeping only.
    pub azimuth_index: usize,
    /// Range bin of the source scan.
    pub range_index: usize,
    /// Time at which the point was observed.
    pub timestamp: f64,
    pub range: f64,
    pub azimuth: f64,
    pub cartesian: Vector2<f64>,
}

impl Keypoint {
    pub fn new(
        azimuth_index: usize,
        range_index: usize,
        timestamp: f64,
        range: f64,
        azimuth: f64,
    ) -> Self {
        Self {
            azimuth_index,
            range_index,
            timestamp,
            range,
            azimuth,
            cartesian: polar_to_cartesian_point(range, azimuth),
        }
    }

    /// The cell `(azimuth, bin)` of `scan`.
    pub fn from_scan(scan: &PolarScan, azimuth: usize, bin: usize) -> Self {
        Self::new(
            azimuth,
            bin,
            scan.azimuth_timestamps()[azimuth],
            scan.range_of_bin(bin),
            scan.azimuth_angles()[azimuth],
        )
    }

    /// Same observation with a different measured range.
    pub fn with_range(&self, range: f64) -> Self {
        Self::new(self.azimuth_index, self.range_index, self.timestamp, range, self.azimuth)
    }

    /// Same observation moved to `position` and re-stamped at `timestamp`.
    pub fn relocated(&self, position: Vector2<f64>, timestamp: f64) -> Self {
        let (range, azimuth) =
            cartesian_to_polar_point(&position).unwrap_or((0.0, self.azimuth));
        Self {
            timestamp,
            range,
            azimuth,
            cartesian: position,
            ..*self
        }
    }
}

/// One correspondence between keypoints of two scans.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchPair {
    pub first: Keypoint,
    pub second: Keypoint,
    pub index1: usize,
    pub index2: usize,
    pub distance: f64,
}

/// Correspondences between scan 1 and scan 2.
///
/// `reference_times` are the times the two scans are anchored to: an
/// estimated transform maps scan-1 coordinates at `reference_times.0` to
/// scan-2 coordinates at `reference_times.1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
    pub reference_times: (f64, f64),
}

impl MatchSet {
    pub fn new(pairs: Vec<MatchPair>, reference_times: (f64, f64)) -> Self {
        Self { pairs, reference_times }
    }

    /// Pairs `(first, second)` with unit distance and sequential indices.
    pub fn from_keypoints(
        pairs: impl IntoIterator<Item = (Keypoint, Keypoint)>,
        reference_times: (f64, f64),
    ) -> Self {
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (first, second))| MatchPair {
                first,
                second,
                index1: i,
                index2: i,
                distance: 0.0,
            })
            .collect();
        Self { pairs, reference_times }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Time elapsed between the two observations of pair `m`.
    pub fn dt(&self, m: usize) -> f64 {
        let p = &self.pairs[m];
        p.second.timestamp - p.first.timestamp
    }

    /// Time between the two reference instants.
    pub fn reference_dt(&self) -> f64 {
        self.reference_times.1 - self.reference_times.0
    }

    pub fn points1(&self) -> Vec<Vector2<f64>> {
        self.pairs.iter().map(|p| p.first.cartesian).collect()
    }

    pub fn points2(&self) -> Vec<Vector2<f64>> {
        self.pairs.iter().map(|p| p.second.cartesian).collect()
    }

    /// Subset of the pairs, keeping reference times.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            pairs: indices.iter().map(|&i| self.pairs[i]).collect(),
            reference_times: self.reference_times,
        }
    }

    /// Apply `f` to both keypoints of every pair.
    pub fn map_keypoints(&self, mut f: impl FnMut(&Keypoint, bool) -> Keypoint) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| MatchPair {
                    first: f(&p.first, false),
                    second: f(&p.second, true),
                    ..*p
                })
                .collect(),
            reference_times: self.reference_times,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct KeypointRow {
    scan: usize,
    azimuth_index: usize,
    range_index: usize,
    timestamp: f64,
    range: f64,
    azimuth: f64,
    x: f64,
    y: f64,
}

impl KeypointRow {
    fn new(scan: usize, k: &Keypoint) -> Self {
        Self {
            scan,
            azimuth_index: k.azimuth_index,
            range_index: k.range_index,
            timestamp: k.timestamp,
            range: k.range,
            azimuth: k.azimuth,
            x: k.cartesian.x,
            y: k.cartesian.y,
        }
    }
}

/// Keypoints of several scans, one row each, tagged with the scan index.
pub fn write_keypoints_csv<'a>(
    scans: impl IntoIterator<Item = (usize, &'a [Keypoint])>,
    w: impl Write,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (scan, keypoints) in scans {
        for k in keypoints {
            out.serialize(KeypointRow::new(scan, k))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MatchRow {
    index1: usize,
    index2: usize,
    distance: f64,
    x1: f64,
    y1: f64,
    t1: f64,
    x2: f64,
    y2: f64,
    t2: f64,
}

pub fn write_matches_csv(matches: &MatchSet, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &matches.pairs {
        out.serialize(MatchRow {
            index1: p.index1,
            index2: p.index2,
            distance: p.distance,
            x1: p.first.cartesian.x,
            y1: p.first.cartesian.y,
            t1: p.first.timestamp,
            x2: p.second.cartesian.x,
            y2: p.second.cartesian.y,
            t2: p.second.timestamp,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_follows_polar() {
        let k = Keypoint::new(3, 100, 0.1, 10.0, std::f64::consts::FRAC_PI_2);
        assert!((k.cartesian - Vector2::new(0.0, 10.0)).norm() < 1e-12);
        let moved = k.relocated(Vector2::new(-3.0, 0.0), 0.0);
        assert!((moved.range - 3.0).abs() < 1e-12);
        assert!((moved.azimuth - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn dt_is_observation_gap() {
        let a = Keypoint::new(0, 0, 1.05, 1.0, 0.0);
        let b = Keypoint::new(0, 0, 1.40, 1.0, 0.0);
        let set = MatchSet::from_keypoints([(a, b)], (1.0, 1.25));
        assert!((set.dt(0) - 0.35).abs() < 1e-12);
        assert!((set.reference_dt() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let k = Keypoint::new(1, 2, 0.0, 1.0, 0.0);
        let mut buf = Vec::new();
        write_keypoints_csv([(0, &[k][..]), (4, &[k][..])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scan,azimuth_index,range_index,timestamp,range,azimuth,x,y\n\
             0,1,2,0.0,1.0,0.0,1.0,0.0\n\
             4,1,2,0.0,1.0,0.0,1.0,0.0\n"
        );
    }
}
