//! SE(3) and so(3) operators.
//!
//! Planar radar motion is embedded in SE(3): a planar pose has a pure yaw
//! rotation and zero z translation, and a planar twist only carries
//! `(rho_x, rho_y, phi_z)`.
//!
//! Conventions used throughout the crate:
//!
//! * A [`Pose`] `T_ab` maps points expressed in frame `b` into frame `a`.
//! * A [`BodyVelocity`] is the sensor's own linear and angular velocity,
//!   expressed in the sensor frame. Under constant velocity the pose of the
//!   sensor at `t + dt` expressed in the sensor frame at `t` is
//!   [`velocity_to_transform`]`(w, dt)`, and a static point seen at `t`
//!   appears at `velocity_to_transform(w, -dt) * p` at `t + dt`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, SMatrix, Vector2, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle the exponential and logarithm use their
/// first-order limits.
pub const SMALL_ANGLE: f64 = 1e-12;

/// Tolerance on orthonormality and determinant of a pose rotation.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Largest rotation angle accepted by [`log_se3`].
pub const LOG_MAX_ANGLE: f64 = std::f64::consts::PI - 1e-6;

pub type Matrix4x6 = SMatrix<f64, 4, 6>;

/// Rigid transform with a proper rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL {
            return Err(Error::InvalidPose(format!(
                "rotation not orthonormal (max |CᵀC - I| = {:e})",
                gram.amax()
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidPose(format!("det(C) = {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Planar pose: yaw about z, translation in the xy plane.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::new(x, y, 0.0),
        }
    }

    /// Reads a 4×4 homogeneous matrix. The bottom row must be exactly `[0 0 0 1]`.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        if m.row(3) != nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0) {
            return Err(Error::InvalidPose("bottom row is not [0 0 0 1]".into()));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Reads the top three rows of a homogeneous matrix, row-major.
    pub fn from_row_major_3x4(v: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Self::new(rotation, Vector3::new(v[3], v[7], v[11]))
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let (c, r) = (&self.rotation, &self.translation);
        [
            c[(0, 0)],
            c[(0, 1)],
            c[(0, 2)],
            r[0],
            c[(1, 0)],
            c[(1, 1)],
            c[(1, 2)],
            r[1],
            c[(2, 0)],
            c[(2, 1)],
            c[(2, 2)],
            r[2],
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Homogeneous 4×4 view.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Applies the pose to a point in the z = 0 plane and drops z.
    pub fn transform_planar(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let q = self.transform_point(&Vector3::new(p.x, p.y, 0.0));
        Vector2::new(q.x, q.y)
    }

    pub fn transform_homogeneous(&self, p: &Vector4<f64>) -> Vector4<f64> {
        let top = self.rotation * p.xyz() + self.translation * p.w;
        Vector4::new(top.x, top.y, top.z, p.w)
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Heading of the rotated x axis projected on the xy plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Re-orthonormalises the rotation after long products.
    pub fn renormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        d[(2, 2)] = (u * v_t).determinant().signum();
        Self {
            rotation: u * d * v_t,
            translation: self.translation,
        }
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        (&self).mul(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

fn rotation_angle(c: &Matrix3<f64>) -> f64 {
    let v = vee_antisym(c);
    let sin = v.norm();
    let cos = 0.5 * (c.trace() - 1.0);
    sin.atan2(cos)
}

/// `vee((C - Cᵀ) / 2)`; equals `sin θ · axis` for a rotation.
fn vee_antisym(c: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(
        c[(2, 1)] - c[(1, 2)],
        c[(0, 2)] - c[(2, 0)],
        c[(1, 0)] - c[(0, 1)],
    )
}

/// Element of se(3) in `[rho; phi]` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub rho: Vector3<f64>,
    pub phi: Vector3<f64>,
}

impl Twist {
    pub fn new(rho: Vector3<f64>, phi: Vector3<f64>) -> Self {
        Self { rho, phi }
    }

    pub fn planar(rho_x: f64, rho_y: f64, phi_z: f64) -> Self {
        Self {
            rho: Vector3::new(rho_x, rho_y, 0.0),
            phi: Vector3::new(0.0, 0.0, phi_z),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            rho: v.fixed_rows::<3>(0).into_owned(),
            phi: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.rho.x, self.rho.y, self.rho.z, self.phi.x, self.phi.y, self.phi.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(self.phi.iter()).all(|v| v.is_finite())
    }
}

/// Sensor-frame velocity `[nu; omega]`, constant between two scans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    /// Linear velocity, m/s.
    pub nu: Vector3<f64>,
    /// Angular velocity, rad/s.
    pub omega: Vector3<f64>,
}

impl BodyVelocity {
    pub fn new(nu: Vector3<f64>, omega: Vector3<f64>) -> Self {
        Self { nu, omega }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Planar velocity: forward/lateral speed and yaw rate.
    pub fn planar(vx: f64, vy: f64, wz: f64) -> Self {
        Self {
            nu: Vector3::new(vx, vy, 0.0),
            omega: Vector3::new(0.0, 0.0, wz),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        let t = Twist::from_vector(v);
        Self {
            nu: t.rho,
            omega: t.phi,
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Twist::new(self.nu, self.omega).to_vector()
    }

    /// The twist accumulated over `dt` seconds.
    pub fn scaled(&self, dt: f64) -> Twist {
        Twist {
            rho: self.nu * dt,
            phi: self.omega * dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.nu.iter().chain(self.omega.iter()).all(|v| v.is_finite())
    }

    /// Linear velocity restricted to the xy plane.
    pub fn planar_linear(&self) -> Vector2<f64> {
        Vector2::new(self.nu.x, self.nu.y)
    }
}

/// `phi^` : the skew-symmetric matrix with `wedge_so3(phi) * v = phi × v`.
pub fn wedge_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -phi.z, phi.y, //
        phi.z, 0.0, -phi.x, //
        -phi.y, phi.x, 0.0,
    )
}

/// `xi^` : 4×4 member of se(3), `[phi^ rho; 0 0]`.
pub fn wedge_se3(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wedge_so3(&xi.phi));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.rho);
    m
}

/// Coefficients `(sin θ/θ, (1 - cos θ)/θ², (θ - sin θ)/θ³)`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < 1e-4 {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 * (1.0 - t2 / 20.0),
            0.5 - t2 / 24.0 * (1.0 - t2 / 30.0),
            1.0 / 6.0 - t2 / 120.0 * (1.0 - t2 / 42.0),
        )
    } else {
        let (s, c) = theta.sin_cos();
        (s / theta, (1.0 - c) / (theta * theta), (theta - s) / (theta * theta * theta))
    }
}

/// Exponential map se(3) → SE(3) in closed form.
pub fn exp_se3(xi: &Twist) -> Pose {
    let theta = xi.phi.norm();
    let k = wedge_so3(&xi.phi);
    if theta < SMALL_ANGLE {
        return Pose {
            rotation: Matrix3::identity() + k,
            translation: xi.rho,
        };
    }
    let (a, b, c) = rodrigues_coefficients(theta);
    let k2 = k * k;
    let rotation = Matrix3::identity() + k * a + k2 * b;
    let left_jacobian = Matrix3::identity() + k * b + k2 * c;
    Pose {
        rotation,
        translation: left_jacobian * xi.rho,
    }
}

/// Logarithm SE(3) → se(3); inverse of [`exp_se3`] for angles below π − 1e-6.
pub fn log_se3(t: &Pose) -> Result<Twist> {
    let c = &t.rotation;
    let theta = rotation_angle(c);
    if theta > LOG_MAX_ANGLE {
        return Err(Error::LogBranchAmbiguous { angle: theta });
    }
    let s = vee_antisym(c);
    if theta < SMALL_ANGLE {
        return Ok(Twist {
            rho: t.translation,
            phi: s,
        });
    }
    // theta / sin(theta), stable for small angles.
    let scale = if theta < 1e-4 {
        1.0 + theta * theta / 6.0
    } else {
        theta / theta.sin()
    };
    let phi = s * scale;
    let k = wedge_so3(&phi);
    // J⁻¹ = I - ½φ^ + (1/θ²)(1 - (θ/2)cot(θ/2)) φ^²
    let d = if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    };
    let j_inv = Matrix3::identity() - k * 0.5 + k * k * d;
    Ok(Twist {
        rho: j_inv * t.translation,
        phi,
    })
}

/// Pose change produced by holding `w` for `dt` seconds, `exp(dt · w^)`.
/// Negative `dt` interpolates backwards.
pub fn velocity_to_transform(w: &BodyVelocity, dt: f64) -> Pose {
    exp_se3(&w.scaled(dt))
}

/// `p^⊙` for a homogeneous point `p = [rho; eta]`: the 4×6 matrix with
/// `wedge_se3(xi) * p = odot(p) * xi`.
pub fn odot(p: &Vector4<f64>) -> Matrix4x6 {
    let mut m = Matrix4x6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * p.w));
    m.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-wedge_so3(&p.xyz())));
    m
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
