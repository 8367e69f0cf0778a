use std::time::Instant;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::{check_matches, draw_subsets, score, select_best, EstimationResult, Hypothesis, RansacConfig};
use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::par;
use crate::se3::Pose;

/// Spread below which a point set counts as a single point.
const DEGENERATE_SPREAD: f64 = 1e-12;

/// Least-squares rigid transform `T` minimising `Σ ‖p2 - T p1‖²`, with the
/// rotation forced to be proper.
pub fn align_rigid_svd(points1: &[Vector2<f64>], points2: &[Vector2<f64>]) -> Result<Pose> {
    if points1.len() != points2.len() {
        return Err(Error::InvalidInput("point lists differ in length".into()));
    }
    if points1.len() < 2 {
        return Err(Error::DegenerateGeometry("need at least 2 point pairs".into()));
    }
    let n = points1.len() as f64;
    let c1 = points1.iter().sum::<Vector2<f64>>() / n;
    let c2 = points2.iter().sum::<Vector2<f64>>() / n;
    let mut cross = Matrix2::zeros();
    let (mut spread1, mut spread2) = (0.0, 0.0);
    for (a, b) in points1.iter().zip(points2) {
        let (a, b) = (a - c1, b - c2);
        cross += a * b.transpose();
        spread1 += a.norm_squared();
        spread2 += b.norm_squared();
    }
    if spread1 < DEGENERATE_SPREAD || spread2 < DEGENERATE_SPREAD {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix2::new(1.0, 0.0, 0.0, d) * u.transpose();
    let t = c2 - rot * c1;

    let mut r3 = Matrix3::identity();
    r3.fixed_view_mut::<2, 2>(0, 0).copy_from(&rot);
    Pose::new(r3, Vector3::new(t.x, t.y, 0.0)).map(|p| p.renormalized())
}

/// RANSAC over rigid transforms, ignoring when each point was observed.
pub fn ransac_rigid(matches: &MatchSet, cfg: &RansacConfig) -> Result<EstimationResult> {
    let start = Instant::now();
    cfg.validate()?;
    check_matches(matches)?;
    let m = matches.len();
    let p1 = matches.points1();
    let p2 = matches.points2();
    let subsets = draw_subsets(m, cfg);
    let hyps = par::map(&subsets, |s| {
        let t = align_rigid_svd(&[p1[s[0]], p1[s[1]]], &[p2[s[0]], p2[s[1]]]).ok()?;
        let (inliers, sse) = score(m, cfg.inlier_threshold, |i| {
            (p2[i] - t.transform_planar(&p1[i])).norm()
        });
        Some(Hypothesis { model: t, inliers, sse })
    });
    let best = select_best(hyps)
        .filter(|h| h.inliers.len() >= cfg.subset_size)
        .ok_or_else(|| Error::Ransac("no hypothesis reached the minimum inlier count".into()))?;

    let q1: Vec<_> = best.inliers.iter().map(|&i| p1[i]).collect();
    let q2: Vec<_> = best.inliers.iter().map(|&i| p2[i]).collect();
    let point_map = align_rigid_svd(&q1, &q2)?;
    Ok(EstimationResult {
        // Points move by the inverse of the sensor motion.
        transform: point_map.inverse(),
        velocity: None,
        inlier_indices: best.inliers,
        iterations_used: 0,
        converged: true,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
