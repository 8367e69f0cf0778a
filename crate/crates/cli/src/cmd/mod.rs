pub mod eval;
pub mod localize;
pub mod odometry;
pub mod simulate;
pub mod undistort;
