//! Ego-motion estimation for spinning FMCW radar.
//!
//! A spinning radar captures each azimuth at a different instant, so a scan
//! taken while the vehicle moves is warped (motion distortion), and the
//! single-sweep FMCW ranging couples radial velocity into range (Doppler
//! shift). This crate provides:
//!
//! * [`se3`]: the SE(3) operators used by the estimators,
//! * [`scan`]: polar scans, Cartesian rendering and scan file codecs,
//! * [`sim`]: a spinning-radar simulator with ground truth,
//! * [`features`]: keypoint detection, descriptors and matching,
//! * [`estimation`]: rigid RANSAC, motion-compensated RANSAC and Doppler correction,
//! * [`eval`]: trajectory compounding and drift/localization metrics,
//! * [`pipeline`]: end-to-end odometry and localization drivers.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise; see [`par`].

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod estimation;
pub mod eval;
pub mod features;
pub mod par;
pub mod pipeline;
pub mod plot;
pub mod scan;
pub mod se3;
pub mod sim;

pub use error::{Error, Result};
pub use se3::{BodyVelocity, Pose, Twist};
