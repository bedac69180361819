// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Point3, PointCloud, Similarity, SpatialIndex, TriangleMesh};
pub use rng::Rng;
pub mod dataset;
pub mod harness;
pub mod merge;
pub mod metrics;
pub mod net;
pub mod toy;
