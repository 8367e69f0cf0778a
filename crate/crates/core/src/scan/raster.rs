use std::f64::consts::TAU;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::PolarScan;
use crate::error::{Error, Result};
use crate::par;

/// Square raster of the scan around the sensor.
///
/// Pixel `(row, col)` has its centre at `x = (col - c) * mpp`,
/// `y = (c - row) * mpp` with `c = (width - 1) / 2`: x grows to the right,
/// y grows upwards, and the sensor sits at the geometric image centre for
/// both odd and even widths.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianImage {
    width: usize,
    meters_per_pixel: f64,
    pixels: Vec<f32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

impl CartesianImage {
    pub fn new(width: usize, meters_per_pixel: f64, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || !(meters_per_pixel > 0.0) {
            return Err(Error::InvalidInput(
                "image width and meters_per_pixel must be positive".into(),
            ));
        }
        if pixels.len() != width * width {
            return Err(Error::InvalidInput(format!(
                "expected {} pixels, got {}",
                width * width,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            meters_per_pixel,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.meters_per_pixel
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn center(&self) -> f64 {
        (self.width as f64 - 1.0) / 2.0
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// Fractional `(row, col)` of a metric point.
    pub fn point_to_pixel(&self, p: &Vector2<f64>) -> (f64, f64) {
        let c = self.center();
        (c - p.y / self.meters_per_pixel, c + p.x / self.meters_per_pixel)
    }

    pub fn pixel_to_point(&self, row: f64, col: f64) -> Vector2<f64> {
        let c = self.center();
        Vector2::new((col - c) * self.meters_per_pixel, (c - row) * self.meters_per_pixel)
    }

    /// Image rotated by +90° about its centre (counter-clockwise).
    pub fn rotated_90(&self) -> Self {
        let w = self.width;
        let mut out = vec![0.0; w * w];
        for r in 0..w {
            for c in 0..w {
                out[(w - 1 - c) * w + r] = self.pixels[r * w + c];
            }
        }
        Self {
            width: w,
            meters_per_pixel: self.meters_per_pixel,
            pixels: out,
        }
    }

    /// Row-major location of the brightest pixel (first on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.pixels.iter().enumerate() {
            if *v > self.pixels[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }
}

/// Maps an angle to a fractional azimuth index of a scan, honouring
/// per-azimuth measured angles.
pub(crate) struct AzimuthLookup {
    unwrapped: Vec<f64>,
}

impl AzimuthLookup {
    pub(crate) fn new(angles: &[f64]) -> Self {
        let mut unwrapped = Vec::with_capacity(angles.len());
        let mut offset = 0.0;
        for (k, a) in angles.iter().enumerate() {
            if k > 0 && *a <= angles[k - 1] {
                offset += TAU;
            }
            unwrapped.push(a + offset);
        }
        Self { unwrapped }
    }

    /// `(k, frac)`: the angle lies `frac` of the way from azimuth `k` to the
    /// next one (wrapping to azimuth 0 after the last).
    pub(crate) fn locate(&self, angle: f64) -> (usize, f64) {
        let n = self.unwrapped.len();
        let first = self.unwrapped[0];
        let a = first + (angle - first).rem_euclid(TAU);
        let k = self.unwrapped.partition_point(|u| *u <= a).saturating_sub(1);
        let next = if k + 1 < n {
            self.unwrapped[k + 1]
        } else {
            first + TAU
        };
        let span = next - self.unwrapped[k];
        let frac = if span > 0.0 {
            ((a - self.unwrapped[k]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (k, frac)
    }
}

/// Rasterises a polar scan onto a `width × width` Cartesian grid.
///
/// Each pixel samples the polar grid at its centre's `(range, azimuth)`;
/// pixels beyond the last range bin are zero.
pub fn render_cartesian(
    scan: &PolarScan,
    width: usize,
    meters_per_pixel: f64,
    interpolation: Interpolation,
) -> Result<CartesianImage> {
    let mut image = CartesianImage::new(width, meters_per_pixel, vec![0.0; width * width])?;
    let a_count = scan.num_azimuths();
    let r_count = scan.num_range_bins();
    if a_count == 0 || r_count == 0 {
        return Ok(image);
    }
    let lookup = AzimuthLookup::new(scan.azimuth_angles());
    let res = scan.config().range_resolution;
    let c = image.center();
    let last_bin = (r_count - 1) as f64;

    par::for_each_chunk_mut(&mut image.pixels, width, |row, out| {
        let y = (c - row as f64) * meters_per_pixel;
        for (col, px) in out.iter_mut().enumerate() {
            let x = (col as f64 - c) * meters_per_pixel;
            let rho = (x * x + y * y).sqrt() / res;
            if rho > last_bin {
                continue;
            }
            let (k, fa) = lookup.locate(y.atan2(x));
            let k1 = (k + 1) % a_count;
            *px = match interpolation {
                Interpolation::Nearest => {
                    let ka = if fa < 0.5 { k } else { k1 };
                    scan.at(ka, rho.round() as usize)
                }
                Interpolation::Bilinear => {
                    let i = (rho.floor() as usize).min(r_count - 1);
                    let i1 = (i + 1).min(r_count - 1);
                    let fr = (rho - i as f64) as f32;
                    let fa = fa as f32;
                    let near = scan.at(k, i) * (1.0 - fr) + scan.at(k, i1) * fr;
                    let far = scan.at(k1, i) * (1.0 - fr) + scan.at(k1, i1) * fr;
                    near * (1.0 - fa) + far * fa
                }
            };
        }
    });
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::RadarConfig;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_scan_renders_black() {
        let scan = PolarScan::zeros(RadarConfig::small(40, 100), 0.0).unwrap();
        let img = render_cartesian(&scan, 51, 0.1, Interpolation::Bilinear).unwrap();
        assert!(img.pixels().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn bright_cell_lands_at_its_position() {
        let cfg = RadarConfig::default();
        let bin = (10.0 / cfg.range_resolution).round() as usize;
        // A few bins wide so that at least one pixel centre samples it.
        let mut power = vec![0.0; cfg.azimuths_per_rotation * cfg.range_bins];
        power[bin - 4..=bin + 4].fill(1.0);
        let scan = PolarScan::uniform(cfg.clone(), 0.0, power).unwrap();
        let img = render_cartesian(&scan, 201, 0.2592, Interpolation::Bilinear).unwrap();
        let (row, col) = img.argmax();
        let (er, ec) = img.point_to_pixel(&Vector2::new(bin as f64 * cfg.range_resolution, 0.0));
        assert!((row as f64 - er).abs() <= 1.0 && (col as f64 - ec).abs() <= 1.0, "{row},{col} vs {er},{ec}");
        assert!(img.get(row, col) > 0.0);
    }

    #[test]
    fn default_raster_spans_250_m() {
        let scan = PolarScan::zeros(RadarConfig::small(400, 8), 0.0).unwrap();
        let img = render_cartesian(&scan, 964, 0.2592, Interpolation::Bilinear).unwrap();
        let span = img.width() as f64 * img.meters_per_pixel();
        assert!((span - 250.0).abs() < 0.2, "{span}");
        let p = img.pixel_to_point(0.0, 963.0);
        assert!((p.x - 124.81).abs() < 0.01 && (p.y - 124.81).abs() < 0.01);
    }

    #[test]
    fn beyond_max_range_is_zero() {
        let cfg = RadarConfig::small(16, 10);
        let power = vec![1.0; 160];
        let scan = PolarScan::uniform(cfg.clone(), 0.0, power).unwrap();
        let img = render_cartesian(&scan, 41, 0.05, Interpolation::Nearest).unwrap();
        assert_eq!(img.get(20, 20), 1.0);
        assert_eq!(img.get(0, 0), 0.0);
    }

    #[test]
    fn rotation_equivariance_at_90_degrees() {
        let cfg = RadarConfig::small(400, 300);
        let mut power = vec![0.0f32; 400 * 300];
        let mut state = 12345u64;
        for p in power.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *p = ((state >> 33) as f32) / (1u64 << 31) as f32;
        }
        let scan = PolarScan::uniform(cfg, 0.0, power).unwrap();
        let rotated = scan.rotated(FRAC_PI_2).unwrap();
        for interp in [Interpolation::Bilinear, Interpolation::Nearest] {
            let a = render_cartesian(&scan, 64, 0.2, interp).unwrap().rotated_90();
            let b = render_cartesian(&rotated, 64, 0.2, interp).unwrap();
            let worst = a
                .pixels()
                .iter()
                .zip(b.pixels())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f32, f32::max);
            // Nearest-neighbour can flip on exact half-way ties.
            let tol = if interp == Interpolation::Bilinear { 1e-4 } else { 1.0 };
            assert!(worst <= tol, "{interp:?}: {worst}");
            if interp == Interpolation::Nearest {
                let differing = a.pixels().iter().zip(b.pixels()).filter(|(x, y)| x != y).count();
                assert!(differing < a.pixels().len() / 100, "{differing}");
            }
        }
    }

    #[test]
    fn measured_angles_are_honoured() {
        let lookup = AzimuthLookup::new(&[6.0, 0.1, 1.0, 3.0]);
        let (k, f) = lookup.locate(0.55);
        assert_eq!(k, 1);
        assert!((f - 0.5).abs() < 1e-12);
        let (k, f) = lookup.locate(5.0);
        assert_eq!(k, 3);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        let (k, _) = lookup.locate(6.2);
        assert_eq!(k, 0);
    }
}
