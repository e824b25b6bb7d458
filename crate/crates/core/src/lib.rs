//! Unsupervised segmentation of log point clouds.
//!
//! Every point gets a soft inlier weight and an offset towards the log's
//! centreline. Both are found by minimising a geometric loss that rewards
//! centreline points lying on a smooth curve, a consistent (possibly
//! tapering) radius, locally planar surface patches whose normals point at
//! the centreline, and keeping as many points as possible.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cloud;
pub mod config;
pub mod eigen;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod knn;
pub mod loss;
pub mod metrics;
pub mod preprocess;
pub mod regression;
pub mod segment;
pub mod synth;

pub use cloud::{Point3, PointCloud};
pub use error::{Error, Result};
