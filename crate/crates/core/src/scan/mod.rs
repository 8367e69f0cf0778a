//! Radar scan data model and polar/Cartesian geometry.

mod config;
mod io;
mod raster;

pub use config::{RadarConfig, SPEED_OF_LIGHT};
pub use io::{
    load_scan, load_scan_from, save_scan, write_scan, AzimuthMode, ScanFormat, OXFORD_CODEC,
    OxfordCodec,
};
pub use raster::{render_cartesian, CartesianImage, Interpolation};
pub(crate) use raster::AzimuthLookup;

use std::f64::consts::TAU;

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// `(range, azimuth) → (x, y)`.
pub fn polar_to_cartesian_point(range: f64, azimuth: f64) -> Vector2<f64> {
    let (s, c) = azimuth.sin_cos();
    Vector2::new(range * c, range * s)
}

/// `(x, y) → (range, azimuth)` with azimuth in `[0, 2π)`.
pub fn cartesian_to_polar_point(p: &Vector2<f64>) -> Result<(f64, f64)> {
    if p.x == 0.0 && p.y == 0.0 {
        return Err(Error::UndefinedAzimuth);
    }
    let mut azimuth = p.y.atan2(p.x);
    if azimuth < 0.0 {
        azimuth += TAU;
    }
    if azimuth >= TAU {
        azimuth = 0.0;
    }
    Ok((p.norm(), azimuth))
}

/// One radar rotation.
///
/// `power` is stored row-major, one row of `config.range_bins` values per
/// azimuth. Range bin `i` is centred at `i * range_resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarScan {
    config: RadarConfig,
    azimuth_angles: Vec<f64>,
    azimuth_timestamps: Vec<f64>,
    power: Vec<f32>,
}

impl PolarScan {
    pub fn new(
        config: RadarConfig,
        azimuth_angles: Vec<f64>,
        azimuth_timestamps: Vec<f64>,
        power: Vec<f32>,
    ) -> Result<Self> {
        config.validate()?;
        let a = config.azimuths_per_rotation;
        if azimuth_angles.len() != a || azimuth_timestamps.len() != a {
            return Err(Error::InvalidInput(format!(
                "expected {a} azimuths, got {} angles and {} timestamps",
                azimuth_angles.len(),
                azimuth_timestamps.len()
            )));
        }
        if power.len() != a * config.range_bins {
            return Err(Error::InvalidInput(format!(
                "power has {} cells, expected {a} x {}",
                power.len(),
                config.range_bins
            )));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput("power must be finite and non-negative".into()));
        }
        if azimuth_timestamps.iter().any(|t| !t.is_finite())
            || azimuth_timestamps.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidInput("azimuth timestamps must be strictly increasing".into()));
        }
        if let (Some(first), Some(last)) = (azimuth_timestamps.first(), azimuth_timestamps.last()) {
            let period = config.rotation_period();
            if last - first > period * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "timestamps span {} s, longer than one rotation ({period} s)",
                    last - first
                )));
            }
        }
        if azimuth_angles.iter().any(|a| !(0.0..TAU).contains(a)) {
            return Err(Error::InvalidInput("azimuth angles must lie in [0, 2π)".into()));
        }
        let wraps = azimuth_angles.windows(2).filter(|w| w[1] <= w[0]).count();
        let closes = match (azimuth_angles.first(), azimuth_angles.last()) {
            (Some(f), Some(l)) if azimuth_angles.len() > 1 => usize::from(f <= l),
            _ => 0,
        };
        if wraps > 1 || (wraps == 1 && closes == 1) {
            return Err(Error::InvalidInput(
                "azimuth angles must increase modulo 2π".into(),
            ));
        }
        Ok(Self {
            config,
            azimuth_angles,
            azimuth_timestamps,
            power,
        })
    }

    /// Scan with uniform azimuths `2πa/A` and timestamps spaced evenly over
    /// one rotation from `start_time`.
    pub fn uniform(config: RadarConfig, start_time: f64, power: Vec<f32>) -> Result<Self> {
        let angles = config.uniform_azimuth_angles();
        let times = config.azimuth_times(start_time);
        Self::new(config, angles, times, power)
    }

    pub fn zeros(config: RadarConfig, start_time: f64) -> Result<Self> {
        let n = config.azimuths_per_rotation * config.range_bins;
        Self::uniform(config, start_time, vec![0.0; n])
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn azimuth_angles(&self) -> &[f64] {
        &self.azimuth_angles
    }

    pub fn azimuth_timestamps(&self) -> &[f64] {
        &self.azimuth_timestamps
    }

    pub fn power(&self) -> &[f32] {
        &self.power
    }

    pub fn num_azimuths(&self) -> usize {
        self.azimuth_angles.len()
    }

    pub fn num_range_bins(&self) -> usize {
        self.config.range_bins
    }

    pub fn row(&self, azimuth: usize) -> &[f32] {
        let r = self.config.range_bins;
        &self.power[azimuth * r..(azimuth + 1) * r]
    }

    pub fn at(&self, azimuth: usize, bin: usize) -> f32 {
        self.power[azimuth * self.config.range_bins + bin]
    }

    /// Time of the first azimuth, used as the scan reference time.
    pub fn reference_time(&self) -> f64 {
        self.azimuth_timestamps.first().copied().unwrap_or(0.0)
    }

    pub fn range_of_bin(&self, bin: usize) -> f64 {
        bin as f64 * self.config.range_resolution
    }

    /// Same scan with every azimuth angle rotated by `delta`.
    pub fn rotated(&self, delta: f64) -> Result<Self> {
        let angles = self
            .azimuth_angles
            .iter()
            .map(|a| {
                let r = (a + delta).rem_euclid(TAU);
                if r >= TAU {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        Self::new(
            self.config.clone(),
            angles,
            self.azimuth_timestamps.clone(),
            self.power.clone(),
        )
    }

    pub fn into_parts(self) -> (RadarConfig, Vec<f64>, Vec<f64>, Vec<f32>) {
        (
            self.config,
            self.azimuth_angles,
            self.azimuth_timestamps,
            self.power,
        )
    }
}
