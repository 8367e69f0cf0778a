use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4x6, Vector2, Vector3, Vector4};

use super::MeasurementNoise;
use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::se3::{odot, velocity_to_transform, BodyVelocity};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnSettings {
    pub max_iters: usize,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnOutcome {
    pub velocity: BodyVelocity,
    pub iterations: usize,
    pub converged: bool,
    /// Cost at `velocity`.
    pub cost: f64,
}

/// Where the scan-1 point of pair `m` should appear in scan 2 if the sensor
/// moves with `w`.
pub fn mc_predict(matches: &MatchSet, m: usize, w: &BodyVelocity) -> Vector2<f64> {
    let t = velocity_to_transform(w, -matches.dt(m));
    t.transform_planar(&matches.pairs[m].first.cartesian)
}

/// `p2 - predicted p2` for pair `m`.
pub fn mc_residual(matches: &MatchSet, m: usize, w: &BodyVelocity) -> Vector2<f64> {
    matches.pairs[m].second.cartesian - mc_predict(matches, m, w)
}

/// `½ Σ eᵀ R⁻¹ e` over `subset`.
pub fn velocity_cost(
    matches: &MatchSet,
    subset: &[usize],
    noise: &MeasurementNoise,
    w: &BodyVelocity,
) -> f64 {
    subset
        .iter()
        .map(|&m| {
            let e = mc_residual(matches, m, w);
            let info = noise.information(&matches.pairs[m].second.cartesian);
            0.5 * e.dot(&(info * e))
        })
        .sum()
}

/// Jacobian of a predicted homogeneous point `T̄ p` with respect to a
/// velocity perturbation `δ` entering as `exp(-dt δ^) T̄ p`: `-dt (T̄ p)^⊙`.
pub fn point_jacobian(predicted: &Vector4<f64>, dt: f64) -> Matrix4x6<f64> {
    odot(predicted) * -dt
}

/// [`point_jacobian`] restricted to the plane: rows `x, y` and the
/// perturbation components `(δv_x, δv_y, δω_z)`.
pub fn planar_jacobian(predicted: &Vector2<f64>, dt: f64) -> Matrix2x3<f64> {
    let full = point_jacobian(&Vector4::new(predicted.x, predicted.y, 0.0, 1.0), dt);
    let mut g = Matrix2x3::zeros();
    for (col, src) in [0usize, 1, 5].into_iter().enumerate() {
        g[(0, col)] = full[(0, src)];
        g[(1, col)] = full[(1, src)];
    }
    g
}

/// Relative cost increase that counts as a rise.
const COST_RISE_RTOL: f64 = 1e-9;

fn planar_velocity(v: &Vector3<f64>) -> BodyVelocity {
    BodyVelocity::planar(v.x, v.y, v.z)
}

/// Gauss-Newton fit of a planar constant body velocity to the pairs in
/// `subset`, starting from `init`.
///
/// Fails with [`Error::DegenerateGeometry`] when the normal equations are
/// singular and with [`Error::NonConvergence`] when the cost rises three
/// iterations in a row. Running out of iterations is not an error; the
/// outcome reports `converged = false`.
pub fn gauss_newton_velocity(
    matches: &MatchSet,
    subset: &[usize],
    noise: &MeasurementNoise,
    settings: &GnSettings,
    init: &BodyVelocity,
) -> Result<GnOutcome> {
    if subset.len() < 2 {
        return Err(Error::InvalidInput("velocity fit needs at least 2 pairs".into()));
    }
    let infos: Vec<Matrix2<f64>> = subset
        .iter()
        .map(|&m| noise.information(&matches.pairs[m].second.cartesian))
        .collect();
    let mut w = Vector3::new(init.nu.x, init.nu.y, init.omega.z);
    let mut cost = velocity_cost(matches, subset, noise, &planar_velocity(&w));
    let mut rises = 0;

    for iter in 1..=settings.max_iters {
        let current = planar_velocity(&w);
        let mut lhs = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (&m, info) in subset.iter().zip(&infos) {
            let predicted = mc_predict(matches, m, &current);
            let e = matches.pairs[m].second.cartesian - predicted;
            let g = planar_jacobian(&predicted, matches.dt(m));
            let gt_info = g.transpose() * info;
            lhs += gt_info * g;
            rhs += gt_info * e;
        }
        let step = lhs
            .cholesky()
            .map(|c| c.solve(&rhs))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| {
                Error::DegenerateGeometry("velocity normal equations are singular".into())
            })?;
        w += step;
        let new_cost = velocity_cost(matches, subset, noise, &planar_velocity(&w));
        // Round-off near the minimum is not divergence.
        if new_cost > cost * (1.0 + COST_RISE_RTOL) + f64::MIN_POSITIVE {
            rises += 1;
            if rises >= 3 {
                return Err(Error::NonConvergence(format!(
                    "cost rose three iterations in a row (now {new_cost:e})"
                )));
            }
        } else {
            rises = 0;
        }
        cost = new_cost;
        if step.norm() < settings.tolerance {
            return Ok(GnOutcome {
                velocity: planar_velocity(&w),
                iterations: iter,
                converged: true,
                cost,
            });
        }
    }
    Ok(GnOutcome {
        velocity: planar_velocity(&w),
        iterations: settings.max_iters,
        converged: false,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::testutil::synthetic_matches;
    use crate::se3::{exp_se3, Twist};
    use proptest::prelude::*;

    const SETTINGS: GnSettings = GnSettings { max_iters: 20, tolerance: 1e-12 };

    proptest! {
        /// The analytic Jacobian against central differences of
        /// `exp(-dt δ^) · T̄ p` in δ.
        #[test]
        fn jacobian_matches_finite_differences(
            vx in -20.0f64..20.0, vy in -5.0f64..5.0, wz in -1.0f64..1.0,
            dt in 0.01f64..0.5, px in -80.0f64..80.0, py in -80.0f64..80.0,
        ) {
            let w = BodyVelocity::planar(vx, vy, wz);
            let p = Vector2::new(px, py);
            let predicted = velocity_to_transform(&w, -dt).transform_planar(&p);
            let g = planar_jacobian(&predicted, dt);
            let h = 1e-6;
            for k in 0..3 {
                let mut d = [0.0; 3];
                d[k] = h;
                let f = |s: f64| {
                    let tw = Twist::planar(-dt * s * d[0], -dt * s * d[1], -dt * s * d[2]);
                    exp_se3(&tw).transform_planar(&predicted)
                };
                let fd = (f(1.0) - f(-1.0)) / (2.0 * h);
                let col = g.column(k);
                let scale = col.norm().max(1e-3);
                prop_assert!((fd - col).norm() / scale < 1e-6, "column {k}: {fd} vs {col}");
            }
        }
    }

    #[test]
    fn zero_motion_converges_immediately() {
        let m = synthetic_matches(&BodyVelocity::zero(), 10, 3, 0.25);
        let all: Vec<usize> = (0..10).collect();
        let out = gauss_newton_velocity(&m, &all, &MeasurementNoise::default(), &SETTINGS, &BodyVelocity::zero()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert_eq!(out.velocity.to_vector().norm(), 0.0);
    }

    #[test]
    fn noiseless_recovery() {
        let w = BodyVelocity::planar(10.0, 0.0, 0.3);
        let m = synthetic_matches(&w, 30, 8, 0.25);
        let all: Vec<usize> = (0..30).collect();
        let noise = MeasurementNoise::default();
        let out = gauss_newton_velocity(&m, &all, &noise, &SETTINGS, &BodyVelocity::zero()).unwrap();
        assert!((out.velocity.nu - w.nu).norm() < 1e-6);
        assert!((out.velocity.omega - w.omega).norm() < 1e-8);
        assert!(out.cost <= velocity_cost(&m, &all, &noise, &w) + 1e-12);
    }

    #[test]
    fn cost_never_rises_on_noiseless_data() {
        let w = BodyVelocity::planar(18.0, 1.0, -0.6);
        let m = synthetic_matches(&w, 25, 4, 0.25);
        let all: Vec<usize> = (0..25).collect();
        let noise = MeasurementNoise::default();
        let mut prev = velocity_cost(&m, &all, &noise, &BodyVelocity::zero());
        for iters in 1..8 {
            let s = GnSettings { max_iters: iters, tolerance: 0.0 };
            let out = gauss_newton_velocity(&m, &all, &noise, &s, &BodyVelocity::zero()).unwrap();
            assert!(out.cost <= prev + 1e-12, "iteration {iters}: {} > {prev}", out.cost);
            prev = out.cost;
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let w = BodyVelocity::planar(5.0, 0.0, 0.1);
        let mut m = synthetic_matches(&w, 2, 1, 0.25);
        m.pairs[1] = m.pairs[0];
        let err = gauss_newton_velocity(&m, &[0, 1], &MeasurementNoise::default(), &SETTINGS, &BodyVelocity::zero())
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }
}
