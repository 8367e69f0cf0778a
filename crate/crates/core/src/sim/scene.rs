use std::f64::consts::TAU;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{BodyVelocity, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    /// Position in the inertial frame at the scene start time.
    pub position: Vector2<f64>,
    /// Power deposited in the scan, independent of range.
    pub reflectivity: f64,
    /// Inertial-frame velocity of a moving object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vector2<f64>>,
}

impl Landmark {
    pub fn fixed(x: f64, y: f64, reflectivity: f64) -> Self {
        Self {
            position: Vector2::new(x, y),
            reflectivity,
            velocity: None,
        }
    }

    /// Inertial position `dt` seconds after the scene start.
    pub fn position_after(&self, dt: f64) -> Vector2<f64> {
        match self.velocity {
            Some(v) => self.position + v * dt,
            None => self.position,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimNoise {
    /// Standard deviation of the Gaussian range jitter, metres.
    pub range_sigma: f64,
    /// Probability that a landmark is missing from a scan.
    pub dropout: f64,
    /// Scale of a Rayleigh-distributed background added to every cell.
    pub floor_sigma: f64,
}

/// Landmarks plus the constant-velocity trajectory of the sensor.
///
/// The sensor pose (sensor to inertial) at time `t` is
/// `start_pose · velocity_to_transform(velocity, t - start_time)`, with the
/// velocity expressed in the sensor frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SimScene {
    pub landmarks: Vec<Landmark>,
    pub velocity: BodyVelocity,
    pub start_pose: Pose,
    pub start_time: f64,
    pub noise: SimNoise,
}

impl SimScene {
    pub fn new(landmarks: Vec<Landmark>, velocity: BodyVelocity) -> Self {
        Self {
            landmarks,
            velocity,
            start_pose: Pose::identity(),
            start_time: 0.0,
            noise: SimNoise::default(),
        }
    }

    pub fn with_noise(mut self, noise: SimNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.landmarks.is_empty() {
            return Err(Error::InvalidInput("scene has no landmarks".into()));
        }
        for (i, l) in self.landmarks.iter().enumerate() {
            let finite = l.position.iter().all(|v| v.is_finite())
                && l.velocity.is_none_or(|v| v.iter().all(|c| c.is_finite()));
            if !(l.reflectivity > 0.0 && l.reflectivity.is_finite()) || !finite {
                return Err(Error::InvalidInput(format!("landmark {i} is invalid")));
            }
        }
        let n = &self.noise;
        if !(n.range_sigma >= 0.0 && n.floor_sigma >= 0.0 && (0.0..1.0).contains(&n.dropout)) {
            return Err(Error::InvalidInput(
                "noise needs non-negative sigmas and dropout in [0, 1)".into(),
            ));
        }
        if !self.velocity.is_finite() || !self.start_time.is_finite() {
            return Err(Error::InvalidInput("scene velocity and start time must be finite".into()));
        }
        Ok(())
    }
}

/// Random scenes made of small landmark clusters, so that local
/// neighbourhoods are distinctive enough to match.
///
/// Cluster centres are drawn in an annulus around the inertial origin, or
/// uniformly in a rectangle when `region_min`/`region_max` are set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenerator {
    /// Seed of the landmark layout, independent of the simulation seed so
    /// that several runs can share one scene.
    pub seed: u64,
    pub clusters: usize,
    pub min_per_cluster: usize,
    pub max_per_cluster: usize,
    /// Spread of landmarks around a cluster centre, metres.
    pub cluster_radius: f64,
    /// Annulus around the origin used when no region is given.
    pub min_range: f64,
    pub max_range: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_min: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_max: Option<[f64; 2]>,
    /// Landmarks closer than this to an existing one are redrawn.
    pub min_separation: f64,
    pub min_reflectivity: f64,
    pub max_reflectivity: f64,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        Self {
            seed: 0,
            clusters: 40,
            min_per_cluster: 3,
            max_per_cluster: 7,
            cluster_radius: 4.0,
            min_range: 10.0,
            max_range: 70.0,
            region_min: None,
            region_max: None,
            min_separation: 1.0,
            min_reflectivity: 0.6,
            max_reflectivity: 1.0,
        }
    }
}

impl SceneGenerator {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.clusters > 0
            && self.min_per_cluster > 0
            && self.min_per_cluster <= self.max_per_cluster
            && self.cluster_radius >= 0.0
            && 0.0 <= self.min_range
            && self.min_range < self.max_range
            && self.min_separation >= 0.0
            && 0.0 < self.min_reflectivity
            && self.min_reflectivity <= self.max_reflectivity
            && match (self.region_min, self.region_max) {
                (None, None) => true,
                (Some(a), Some(b)) => a[0] < b[0] && a[1] < b[1],
                _ => false,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("inconsistent scene generator settings".into()))
        }
    }

    /// Landmarks in the inertial frame.
    pub fn landmarks(&self) -> Result<Vec<Landmark>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out: Vec<Landmark> = Vec::new();
        let min_sep2 = self.min_separation * self.min_separation;
        for _ in 0..self.clusters {
            let centre = match (self.region_min, self.region_max) {
                (Some(a), Some(b)) => {
                    Vector2::new(rng.random_range(a[0]..b[0]), rng.random_range(a[1]..b[1]))
                }
                _ => {
                    // Area-uniform in the annulus.
                    let (r0, r1) = (self.min_range.powi(2), self.max_range.powi(2));
                    let r = rng.random_range(r0..r1).sqrt();
                    let th = rng.random_range(0.0..TAU);
                    Vector2::new(r * th.cos(), r * th.sin())
                }
            };
            let n = rng.random_range(self.min_per_cluster..=self.max_per_cluster);
            for _ in 0..n {
                for _attempt in 0..20 {
                    let off = Vector2::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ) * self.cluster_radius;
                    let p = centre + off;
                    if out.iter().all(|l| (l.position - p).norm_squared() >= min_sep2) {
                        let refl = if self.min_reflectivity < self.max_reflectivity {
                            rng.random_range(self.min_reflectivity..self.max_reflectivity)
                        } else {
                            self.min_reflectivity
                        };
                        out.push(Landmark {
                            position: p,
                            reflectivity: refl,
                            velocity: None,
                        });
                        break;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Human-editable scene description: planar start pose `[x, y, yaw]`,
/// planar body velocity `[v_x, v_y, ω_z]`, noise, and either explicit
/// landmarks or a generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneFile {
    pub seed: Option<u64>,
    pub start_time: f64,
    pub start: [f64; 3],
    pub velocity: [f64; 3],
    pub noise: SimNoise,
    pub landmarks: Vec<Landmark>,
    pub generator: Option<SceneGenerator>,
}

impl SceneFile {
    /// Build the scene; generated landmarks come after explicit ones.
    pub fn to_scene(&self) -> Result<SimScene> {
        let mut landmarks = self.landmarks.clone();
        if let Some(g) = &self.generator {
            landmarks.extend(g.landmarks()?);
        }
        let scene = SimScene {
            landmarks,
            velocity: BodyVelocity::planar(self.velocity[0], self.velocity[1], self.velocity[2]),
            start_pose: Pose::planar(self.start[0], self.start[1], self.start[2]),
            start_time: self.start_time,
            noise: self.noise,
        };
        scene.validate()?;
        Ok(scene)
    }
}
