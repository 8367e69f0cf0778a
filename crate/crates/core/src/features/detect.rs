use serde::{Deserialize, Serialize};

use super::Keypoint;
use crate::error::{Error, Result};
use crate::par;
use crate::scan::PolarScan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Threshold on the normalised score `y / σ_q`.
    pub z_q: f64,
    /// Width of the Gaussian smoothing kernel, in range bins.
    pub sigma_bins: f64,
    /// Keep at most this many of the strongest peaks per azimuth.
    pub max_points_per_azimuth: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            z_q: 3.0,
            sigma_bins: 17.0,
            max_points_per_azimuth: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_q.is_finite() && self.sigma_bins > 0.0 && self.sigma_bins.is_finite()) {
            return Err(Error::InvalidInput(
                "detector needs a finite z_q and a positive sigma".into(),
            ));
        }
        Ok(())
    }
}

/// Zero-padded convolution with a normalised Gaussian truncated at 3σ.
pub(crate) fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let src = i + j as isize - radius;
                if (0..n).contains(&src) {
                    acc += w * x[src as usize];
                }
            }
            acc / norm
        })
        .collect()
}

/// Normalised detection score of one azimuth row, or `None` when the row
/// has no noise estimate (constant or all-positive after mean removal).
pub(crate) fn row_scores(row: &[f32], sigma_bins: f64) -> Option<Vec<f64>> {
    if row.is_empty() {
        return None;
    }
    let mean = row.iter().map(|&v| v as f64).sum::<f64>() / row.len() as f64;
    let q: Vec<f64> = row.iter().map(|&v| v as f64 - mean).collect();
    let p = gaussian_smooth(&q, sigma_bins);

    // Noise level from the negative half of the mean-removed signal.
    let (sum_sq, count) = q
        .iter()
        .filter(|v| **v < 0.0)
        .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        return None;
    }
    let sigma_q = (sum_sq / count as f64).sqrt();
    if !(sigma_q > 0.0) {
        return None;
    }

    Some(
        q.iter()
            .zip(&p)
            .map(|(&qi, &pi)| {
                let nqp = (-0.5 * ((qi - pi) / sigma_q).powi(2)).exp();
                let npp = (-0.5 * (pi / sigma_q).powi(2)).exp();
                (qi * (1.0 - nqp) + pi * (nqp - npp)) / sigma_q
            })
            .collect(),
    )
}

fn row_peaks(scores: &[f64], z_q: f64, limit: Option<usize>) -> Vec<usize> {
    let n = scores.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let s = scores[i];
            s > z_q && (i == 0 || s > scores[i - 1]) && (i + 1 == n || s > scores[i + 1])
        })
        .collect();
    if let Some(k) = limit {
        if peaks.len() > k {
            peaks.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            peaks.truncate(k);
            peaks.sort_unstable();
        }
    }
    peaks
}

/// Per-azimuth peak detector with adaptive noise normalisation.
///
/// Each row is mean-removed and smoothed; the smoothed and raw signals are
/// blended according to how far each sits above the row's noise floor, and
/// local maxima of the blended score above `z_q` become keypoints. Output is
/// ordered by azimuth, then range.
pub fn detect_cen2018(scan: &PolarScan, cfg: &DetectorConfig) -> Result<Vec<Keypoint>> {
    cfg.validate()?;
    let rows = par::map_range(scan.num_azimuths(), |a| {
        let Some(scores) = row_scores(scan.row(a), cfg.sigma_bins) else {
            return Vec::new();
        };
        row_peaks(&scores, cfg.z_q, cfg.max_points_per_azimuth)
            .into_iter()
            .map(|i| Keypoint::from_scan(scan, a, i))
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::RadarConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scan_from_rows(rows: &[Vec<f32>]) -> PolarScan {
        let cfg = RadarConfig::small(rows.len(), rows[0].len());
        PolarScan::uniform(cfg, 0.0, rows.concat()).unwrap()
    }

    #[test]
    fn smoothing_preserves_interior_mass() {
        let mut x = vec![0.0; 301];
        x[150] = 1.0;
        let y = gaussian_smooth(&x, 17.0);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(
            y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0,
            150
        );
    }

    #[test]
    fn flat_row_yields_nothing() {
        let scan = scan_from_rows(&[vec![2.0; 200], vec![0.0; 200]]);
        assert!(detect_cen2018(&scan, &DetectorConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn finds_isolated_targets_in_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bins = 1000;
        let targets = [120usize, 400, 777];
        let rows: Vec<Vec<f32>> = (0..8)
            .map(|_| {
                let mut row: Vec<f32> = (0..bins).map(|_| rng.random_range(0.0..1.0)).collect();
                for &t in &targets {
                    row[t] += 10.0;
                }
                row
            })
            .collect();
        let scan = scan_from_rows(&rows);
        let kps = detect_cen2018(&scan, &DetectorConfig { z_q: 6.0, ..Default::default() }).unwrap();
        for a in 0..8 {
            let bins_found: Vec<usize> = kps
                .iter()
                .filter(|k| k.azimuth_index == a)
                .map(|k| k.range_index)
                .collect();
            assert_eq!(bins_found, targets, "azimuth {a}");
        }
    }

    #[test]
    fn limit_keeps_strongest() {
        let mut row = vec![0.0f32; 500];
        row[50] = 5.0;
        row[250] = 20.0;
        row[450] = 10.0;
        let scan = scan_from_rows(&[row]);
        let cfg = DetectorConfig {
            max_points_per_azimuth: Some(2),
            ..Default::default()
        };
        let bins: Vec<usize> = detect_cen2018(&scan, &cfg)
            .unwrap()
            .iter()
            .map(|k| k.range_index)
            .collect();
        assert_eq!(bins, vec![250, 450]);
    }

    #[test]
    fn sequential_matches_parallel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f32>> = (0..16)
            .map(|_| (0..300).map(|_| rng.random_range(0.0f32..1.0).powi(4) * 10.0).collect())
            .collect();
        let scan = scan_from_rows(&rows);
        let cfg = DetectorConfig::default();
        let a = detect_cen2018(&scan, &cfg).unwrap();
        let b = par::sequential(|| detect_cen2018(&scan, &cfg).unwrap());
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #[test]
        fn detection_follows_a_range_shift(at in 80usize..300, shift in 0usize..200, width in 0.5f32..3.0) {
            let row = |centre: usize| -> Vec<f32> {
                (0..600)
                    .map(|i| {
                        let z = (i as f32 - centre as f32) / width;
                        0.2 + 4.0 * (-0.5 * z * z).exp()
                    })
                    .collect()
            };
            let detect = |centre| {
                detect_cen2018(&scan_from_rows(&[row(centre)]), &DetectorConfig::default())
                    .unwrap()
                    .iter()
                    .map(|k| k.range_index)
                    .collect::<Vec<_>>()
            };
            let base = detect(at);
            proptest::prop_assert_eq!(base.clone(), vec![at]);
            let moved: Vec<usize> = base.iter().map(|b| b + shift).collect();
            proptest::prop_assert_eq!(detect(at + shift), moved);
        }
    }
}
