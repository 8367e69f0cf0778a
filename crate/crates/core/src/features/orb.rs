use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::scan::CartesianImage;

/// Sampling pairs `[x1, y1, x2, y2]` of the binary intensity tests, offsets
/// in pixels from the keypoint (x to the right, y down). All points lie
/// within radius 8 so a rotated 5×5 box stays inside the 21-pixel patch.
const PATTERN: [[i8; 4]; 256] = [
    [-1, 2, 3, 5], [-6, -2, 0, -7], [-2, -3, 1, -6], [-1, 3, -3, -2],
    [-1, -2, -4, 0], [4, 3, 1, -2], [-8, 0, -2, -1], [-3, 7, 0, -7],
    [-2, 4, 4, 1], [3, 7, 2, -7], [-1, -6, 4, -5], [-5, 4, -3, 5],
    [6, -3, 5, 3], [0, -2, 5, 3], [3, -1, 2, 0], [4, 4, -1, -4],
    [1, -2, 5, 0], [-2, -4, 1, -2], [-7, -1, -1, 5], [-2, 0, -1, -4],
    [-4, 1, -2, -1], [1, 6, 0, -4], [-3, 3, 6, 1], [1, 2, -5, -2],
    [0, 3, 2, 4], [-3, 4, 3, -1], [5, -4, 2, 1], [-1, -2, 5, 0],
    [-3, -2, 1, -5], [1, 0, 3, 2], [-6, 0, -2, 5], [-4, -3, 6, 2],
    [0, 4, 3, 3], [-3, 0, -3, 1], [6, 3, 0, -1], [1, -4, 1, 0],
    [-1, -2, 6, 3], [5, 1, 1, -3], [5, 2, 1, -3], [2, 3, -5, -6],
    [-5, 2, 3, -6], [0, -1, -5, -4], [2, 4, -1, 3], [-6, 1, 1, 1],
    [-7, 3, -1, -1], [-2, -6, -6, 4], [1, 3, 1, 4], [4, 1, 2, 1],
    [2, 0, 3, 4], [0, 1, -2, -6], [-5, 0, 3, -2], [4, -1, -5, 2],
    [6, 0, 6, -3], [-4, -2, -5, 0], [-1, 4, -2, 5], [0, 0, -1, -3],
    [4, 2, 3, -6], [-1, 6, 2, -5], [-4, 4, 0, -3], [5, -4, 3, -3],
    [4, -3, 3, 1], [-3, -4, 4, -3], [4, 3, 2, 1], [3, 0, -3, 4],
    [7, -1, -3, -5], [0, 0, 0, -4], [1, -3, 0, 4], [-2, -3, 0, 1],
    [2, 3, -1, -5], [-2, 3, -1, 2], [2, 1, 5, 2], [-3, 4, -7, 3],
    [-4, -3, 2, -6], [-1, 5, 2, 0], [4, -1, 0, -1], [-6, 2, -4, -4],
    [-2, -2, 2, -1], [-3, -2, 3, 2], [0, -2, 6, 0], [6, 3, -2, -4],
    [5, 0, -2, 7], [2, 1, 1, 0], [0, -2, 3, -1], [-2, -5, 4, 0],
    [-4, 0, -1, -5], [6, -3, -1, 2], [0, 0, 0, -1], [2, -4, -1, 6],
    [-5, -1, -4, 1], [5, 4, -8, 0], [1, 2, -8, 0], [1, 0, 2, 5],
    [-1, -1, -5, -1], [-1, 2, 4, 0], [1, 7, 0, 4], [-2, -1, -6, 1],
    [-4, 6, -6, 2], [-2, -2, 6, -3], [4, 3, -1, 6], [2, 6, 2, 5],
    [6, -4, 0, 0], [-3, -1, 3, -4], [0, 6, 3, 0], [2, -4, 0, 7],
    [5, -3, -5, 0], [7, -1, 1, 2], [2, 1, 0, -2], [3, -2, -1, -7],
    [1, 2, 0, -5], [1, 0, 1, -1], [4, -4, 0, -1], [-2, 4, -4, -2],
    [-1, 4, 0, -3], [3, 3, -2, -6], [-5, -2, 0, 1], [-2, -3, 1, 0],
    [-4, -6, -1, 3], [1, 1, -3, 2], [5, 4, 2, -1], [5, -1, -7, 2],
    [2, -6, 0, 1], [-1, -6, -1, 2], [-2, 4, -1, 2], [2, 2, -2, -1],
    [2, 1, -1, 2], [-2, 5, -3, 3], [-4, -1, -3, 3], [-4, -5, -6, 4],
    [7, 3, 1, 6], [1, 4, 1, 5], [4, -3, -4, -5], [2, 4, -3, 2],
    [-3, -3, 1, -2], [2, -4, -1, -1], [-4, 5, 3, 0], [-7, -3, -3, -2],
    [-2, 3, -1, 3], [-2, -3, -2, 4], [1, 0, 2, -2], [6, 5, -5, -2],
    [5, 5, -3, 0], [1, -2, -2, -5], [3, 1, 2, 2], [4, -2, 1, 0],
    [1, 4, -2, 3], [1, -3, 7, -3], [-3, -3, -2, 0], [2, 2, 4, 5],
    [0, 0, -5, -2], [2, -6, 5, 2], [4, 5, 5, 2], [2, 3, 4, -2],
    [1, 2, -4, 0], [-3, 2, -7, 1], [-1, 3, 0, 0], [2, 0, -1, -2],
    [-1, -1, 4, -5], [-2, -2, 4, -2], [2, 4, 3, -1], [-1, 2, 2, 0],
    [-5, 0, -6, 3], [-5, 4, -3, 3], [-7, 2, 3, -7], [5, -5, 4, -6],
    [4, -3, -5, 1], [-5, 0, 2, 3], [-1, -1, 3, -2], [-1, 6, -1, -1],
    [5, -6, 1, 3], [3, -5, -2, 0], [0, -2, 1, 0], [-6, 5, -2, -4],
    [1, -2, 1, 6], [-1, 0, -3, -3], [4, -2, -4, 0], [2, 5, -3, 2],
    [0, -4, 3, -1], [-3, 2, -1, 6], [-4, 4, -3, 2], [-5, -1, 4, 3],
    [2, 4, 0, 0], [-1, -4, 3, 2], [2, 0, 3, -5], [1, 4, 5, -1],
    [-1, -3, 4, -2], [-1, -3, -1, 4], [-6, 1, -3, -4], [1, 7, 1, 1],
    [-2, 1, 3, 6], [0, 3, 0, 6], [-6, 2, -3, -2], [2, -3, 0, -1],
    [-4, -2, 4, -3], [0, 4, -3, 5], [-1, 4, 7, 3], [-3, 2, 1, -3],
    [0, 4, 3, 4], [5, 2, 6, -3], [-1, 0, -3, 1], [-1, -4, -3, -1],
    [-5, 2, -1, 6], [-1, -3, 6, 1], [5, -2, 2, 6], [0, -6, -3, -3],
    [-4, -3, -5, -1], [-3, -1, -1, 1], [7, -2, -5, -3], [5, 4, -6, -1],
    [4, -1, 0, 0], [-2, -3, 1, 1], [6, 0, -2, -3], [-1, 1, 0, -4],
    [4, 2, -1, 3], [4, -5, 4, 0], [-2, 1, 4, 5], [3, -2, 5, 0],
    [2, -3, 3, 4], [1, 4, 5, -1], [-2, -4, 7, 1], [1, -5, 7, 3],
    [-1, 7, -2, 0], [-1, -2, 8, 0], [4, 1, -2, -3], [5, -2, 2, -4],
    [-5, 5, 3, -5], [-2, 7, 5, 2], [2, -3, 2, -5], [0, -3, 1, -3],
    [1, 0, -5, 1], [0, 4, -1, -2], [4, 1, -3, -4], [-5, -3, 0, 4],
    [-1, 5, -3, 1], [-5, 1, 1, 0], [0, -1, -4, 2], [5, -1, -1, 5],
    [2, 1, 6, -1], [-1, -5, -1, 2], [5, 4, 3, 4], [-3, 5, -3, -5],
    [-2, -7, 3, -4], [3, 6, -4, -1], [0, 0, -4, -3], [-7, 1, 5, -4],
    [3, -2, -5, -1], [3, 6, -1, 0], [1, -6, -3, -2], [2, -1, -6, -5],
    [-3, -3, 2, 1], [2, 1, 4, -4], [0, -4, 2, -3], [1, -2, 1, 6],
    [4, -4, -1, -6], [4, 5, 1, 7], [5, -2, 1, 1], [5, 1, 5, -6],
];

/// Half-width of the box filter applied around each sample.
const BOX_HALF: isize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbConfig {
    /// Side of the square patch used for orientation, in pixels.
    pub patch_size: usize,
}

impl Default for OrbConfig {
    fn default() -> Self {
        Self { patch_size: 21 }
    }
}

/// Summed-area table with a zero first row and column.
struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(image: &CartesianImage) -> Self {
        let w = image.width();
        let mut sums = vec![0.0; (w + 1) * (w + 1)];
        for r in 0..w {
            let mut row_acc = 0.0;
            for c in 0..w {
                row_acc += image.get(r, c) as f64;
                sums[(r + 1) * (w + 1) + c + 1] = sums[r * (w + 1) + c + 1] + row_acc;
            }
        }
        Self { width: w, sums }
    }

    /// Sum over the box centred at `(row, col)`; the caller keeps it in bounds.
    fn box_sum(&self, row: isize, col: isize) -> f64 {
        let w1 = self.width + 1;
        let (r0, r1) = ((row - BOX_HALF) as usize, (row + BOX_HALF + 1) as usize);
        let (c0, c1) = ((col - BOX_HALF) as usize, (col + BOX_HALF + 1) as usize);
        self.sums[r1 * w1 + c1] - self.sums[r0 * w1 + c1] - self.sums[r1 * w1 + c0]
            + self.sums[r0 * w1 + c0]
    }
}

/// Intensity-centroid orientation of the disc of `radius` around `(row, col)`,
/// as an angle in image coordinates (x right, y down).
fn orientation(image: &CartesianImage, row: isize, col: isize, radius: isize) -> f64 {
    let (mut m10, mut m01) = (0.0, 0.0);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let v = image.get((row + dy) as usize, (col + dx) as usize) as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

/// Rotated binary descriptors for keypoints given in metric sensor
/// coordinates, computed on a Cartesian render of the scan.
///
/// Returns one entry per input; keypoints whose patch does not fit in the
/// image get `None`.
pub fn orb_descriptors(
    image: &CartesianImage,
    points: &[Vector2<f64>],
    cfg: &OrbConfig,
) -> Result<Vec<Option<[u64; 4]>>> {
    if cfg.patch_size < 17 || cfg.patch_size.is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "ORB patch size must be odd and at least 17".into(),
        ));
    }
    let radius = (cfg.patch_size / 2) as isize;
    // Rotated samples reach 8 + BOX_HALF·√2 < radius + 1 pixels out.
    let margin = radius + 1;
    let integral = Integral::new(image);
    let w = image.width() as isize;
    Ok(par::map(points, |p| {
        let (row, col) = image.point_to_pixel(p);
        let (row, col) = (row.round() as isize, col.round() as isize);
        if row < margin || col < margin || row >= w - margin || col >= w - margin {
            return None;
        }
        let theta = orientation(image, row, col, radius);
        let (s, c) = theta.sin_cos();
        let sample = |x: i8, y: i8| {
            let (x, y) = (x as f64, y as f64);
            let dx = (c * x - s * y).round() as isize;
            let dy = (s * x + c * y).round() as isize;
            integral.box_sum(row + dy, col + dx)
        };
        let mut bits = [0u64; 4];
        for (i, t) in PATTERN.iter().enumerate() {
            if sample(t[0], t[1]) < sample(t[2], t[3]) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Some(bits)
    }))
}

pub fn hamming(a: &[u64; 4], b: &[u64; 4]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}
