//! Crowd anomaly detection from dynamic textures.
//!
//! Video is cut into `p × p × q` spatio-temporal cubes, each cube is fitted
//! with a linear dynamical system, and the spectral features of the fit are
//! scored against a Gaussian model of normal activity by Mahalanobis
//! distance. A log-linear classifier over the same features labels events.

pub mod cubes;
pub mod dyntex;
pub mod error;
pub mod evalharness;
pub mod eventclf;
pub mod frame_io;
pub mod gaussmodel;
pub mod linalg;
pub mod par;
pub mod pipeline;

pub use error::{Error, Result};
pub use par::Execution;
