use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{wrap_pi, Pose};

/// Fixed-width histogram starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64], bin_width: f64) -> Self {
        let mut counts = Vec::new();
        for v in values {
            let b = (v / bin_width).floor().max(0.0) as usize;
            if b >= counts.len() {
                counts.resize(b + 1, 0);
            }
            counts[b] += 1;
        }
        Self { bin_width, counts }
    }

    /// Lower edge of the bin holding the `q`-quantile by count.
    pub fn quantile_bin(&self, q: f64) -> f64 {
        let total: usize = self.counts.iter().sum();
        let target = (q * total as f64).ceil().max(1.0) as usize;
        let mut acc = 0;
        for (i, c) in self.counts.iter().enumerate() {
            acc += c;
            if acc >= target {
                return i as f64 * self.bin_width;
            }
        }
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub median_translation: f64,
    pub median_rotation_deg: f64,
    /// Per-pair errors in input order.
    pub translation_errors: Vec<f64>,
    pub rotation_errors_deg: Vec<f64>,
    /// 0.1 m bins.
    pub translation_histogram: Histogram,
    /// 0.1° bins.
    pub rotation_histogram: Histogram,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Error statistics of `(estimated, truth)` pose pairs. Each error is taken
/// from `truth⁻¹ · estimated`: the norm of its translation and the
/// magnitude of its yaw.
pub fn evaluate_localization(pairs: &[(Pose, Pose)]) -> Result<LocalizationReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no localization pairs".into()));
    }
    let (translation_errors, rotation_errors_deg): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .map(|(est, truth)| {
            let d = truth.inverse() * *est;
            (d.translation().norm(), wrap_pi(d.yaw()).abs().to_degrees())
        })
        .unzip();
    Ok(LocalizationReport {
        median_translation: median(&translation_errors),
        median_rotation_deg: median(&rotation_errors_deg),
        translation_histogram: Histogram::of(&translation_errors, 0.1),
        rotation_histogram: Histogram::of(&rotation_errors_deg, 0.1),
        translation_errors,
        rotation_errors_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_is_zero() {
        let p = Pose::planar(3.0, 4.0, 1.0);
        let r = evaluate_localization(&[(p, p), (p, p)]).unwrap();
        assert_eq!(r.median_translation, 0.0);
        assert_eq!(r.median_rotation_deg, 0.0);
    }

    #[test]
    fn unit_offset() {
        let r = evaluate_localization(&[(Pose::planar(1.0, 0.0, 0.0), Pose::identity())]).unwrap();
        assert_eq!(r.median_translation, 1.0);
        assert_eq!(r.translation_histogram.counts[10], 1);
    }

    #[test]
    fn median_matches_sorted_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let offsets: Vec<f64> = (0..101).map(|_| rng.random_range(0.0..3.0)).collect();
        let yaws: Vec<f64> = (0..101).map(|_| rng.random_range(-0.05..0.05)).collect();
        let pairs: Vec<(Pose, Pose)> = offsets
            .iter()
            .zip(&yaws)
            .map(|(d, a)| (Pose::planar(10.0, *d, 0.3 + a), Pose::planar(10.0, 0.0, 0.3)))
            .collect();
        let r = evaluate_localization(&pairs).unwrap();
        let mut sorted = offsets.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((r.median_translation - sorted[50]).abs() < 1e-12);
        let mut yaw_sorted: Vec<f64> = yaws.iter().map(|a| a.abs().to_degrees()).collect();
        yaw_sorted.sort_by(f64::total_cmp);
        assert!((r.median_rotation_deg - yaw_sorted[50]).abs() < 1e-9);
        // The median sits in the bin where the cumulative count crosses half.
        let bin = r.translation_histogram.quantile_bin(0.5);
        assert!(bin <= r.median_translation && r.median_translation < bin + 0.1);
    }

    #[test]
    fn empty_is_error() {
        assert!(evaluate_localization(&[]).is_err());
    }
}
