use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sensor parameters of a spinning FMCW radar.
///
/// `beta = transmit_freq / sweep_slope` converts radial velocity (m/s) into
/// the apparent range shift (m) caused by the Doppler effect. When both FMCW
/// parameters are present they must agree with `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    /// Rotations per second, Hz.
    pub rotation_rate: f64,
    pub azimuths_per_rotation: usize,
    /// Metres per range bin.
    pub range_resolution: f64,
    pub range_bins: usize,
    /// Horizontal beamwidth, radians.
    pub beamwidth: f64,
    /// Carrier frequency f_t, Hz.
    pub transmit_freq: Option<f64>,
    /// Modulation slope df/dt, Hz/s.
    pub sweep_slope: Option<f64>,
    /// Doppler range coefficient, seconds (m per m/s).
    pub beta: f64,
}

impl Default for RadarConfig {
    /// 4 Hz, 400 azimuths, 4.32 cm bins out to 163 m, 1.8° beam, beta 0.049.
    fn default() -> Self {
        Self {
            rotation_rate: 4.0,
            azimuths_per_rotation: 400,
            range_resolution: 0.0432,
            range_bins: 3773,
            beamwidth: 1.8f64.to_radians(),
            transmit_freq: None,
            sweep_slope: None,
            beta: 0.049,
        }
    }
}

impl RadarConfig {
    /// Nominal FMCW front end: 76.5 GHz carrier and a 1 GHz sweep repeated
    /// 1600 times per second.
    pub const NOMINAL_TRANSMIT_FREQ: f64 = 76.5e9;
    pub const NOMINAL_SWEEP_SLOPE: f64 = 1.6e12;

    /// Derives `beta` from the carrier frequency and sweep slope.
    pub fn with_fmcw(mut self, transmit_freq: f64, sweep_slope: f64) -> Self {
        self.transmit_freq = Some(transmit_freq);
        self.sweep_slope = Some(sweep_slope);
        self.beta = transmit_freq / sweep_slope;
        self
    }

    /// Tiny geometry for unit tests.
    pub fn small(azimuths: usize, range_bins: usize) -> Self {
        Self {
            azimuths_per_rotation: azimuths,
            range_bins,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("radar config: {m}")));
        if !(self.rotation_rate.is_finite() && self.rotation_rate > 0.0) {
            return bad("rotation_rate must be positive");
        }
        if !(self.range_resolution.is_finite() && self.range_resolution > 0.0) {
            return bad("range_resolution must be positive");
        }
        if !(self.beamwidth.is_finite() && self.beamwidth >= 0.0) {
            return bad("beamwidth must be non-negative");
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite");
        }
        if let (Some(ft), Some(slope)) = (self.transmit_freq, self.sweep_slope) {
            if !(ft > 0.0 && slope > 0.0) {
                return bad("transmit_freq and sweep_slope must be positive");
            }
            let implied = ft / slope;
            if ((implied - self.beta) / implied).abs() > 1e-12 {
                return bad(&format!(
                    "beta {} disagrees with transmit_freq/sweep_slope = {implied}",
                    self.beta
                ));
            }
        }
        Ok(())
    }

    pub fn rotation_period(&self) -> f64 {
        1.0 / self.rotation_rate
    }

    /// Angular spacing between azimuths, radians.
    pub fn azimuth_step(&self) -> f64 {
        TAU / self.azimuths_per_rotation as f64
    }

    /// Time between consecutive azimuths, seconds.
    pub fn azimuth_period(&self) -> f64 {
        1.0 / (self.azimuths_per_rotation as f64 * self.rotation_rate)
    }

    pub fn max_range(&self) -> f64 {
        self.range_bins as f64 * self.range_resolution
    }

    pub fn uniform_azimuth_angles(&self) -> Vec<f64> {
        let step = self.azimuth_step();
        (0..self.azimuths_per_rotation)
            .map(|a| a as f64 * step)
            .collect()
    }

    pub fn azimuth_times(&self, start_time: f64) -> Vec<f64> {
        let dt = self.azimuth_period();
        (0..self.azimuths_per_rotation)
            .map(|a| start_time + a as f64 * dt)
            .collect()
    }

    /// Carrier wavelength `c / f_t`, when the carrier is known.
    pub fn wavelength(&self) -> Option<f64> {
        self.transmit_freq.map(|ft| SPEED_OF_LIGHT / ft)
    }

    /// Doppler frequency `2u/λ` for a closing radial speed `u` (m/s).
    pub fn doppler_frequency(&self, radial_speed: f64) -> Option<f64> {
        self.wavelength().map(|l| 2.0 * radial_speed / l)
    }

    /// Range equivalent of a beat-frequency offset, `c Δf / (2 df/dt)`.
    pub fn range_from_beat(&self, beat: f64) -> Option<f64> {
        self.sweep_slope.map(|s| SPEED_OF_LIGHT * beat / (2.0 * s))
    }

    /// Apparent range decrease for a target closing at `radial_speed`,
    /// following the Doppler frequency through the FMCW range equation.
    pub fn doppler_range_shift(&self, radial_speed: f64) -> Option<f64> {
        self.doppler_frequency(radial_speed)
            .and_then(|fd| self.range_from_beat(fd))
    }
}
