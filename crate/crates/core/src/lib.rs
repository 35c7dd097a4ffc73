//! Material-labeled 3D semantic mapping from recorded RGB-D sequences.
//!
//! Detections are lifted to world-frame boxes, frames are back-projected
//! into one cloud, the cloud is clustered by multi-scale voxel connected
//! components, and each cluster takes the material of the nearest box.
//! [`cafusion`] holds a toy-scale attention fusion network with analytic
//! gradients that can stand in for the material classifier.
//!
//! Geometry and fusion types are generic over [`Real`] (`f32` or `f64`);
//! the aliases below fix the common choices.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cafusion;
pub mod config;
mod error;
pub mod eval;
pub mod geometry;
pub mod pipeline;
mod scalar;
pub mod sequence;
pub mod synth;
mod union_find;
pub mod voxmap;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;
pub use union_find::UnionFind;

pub type Point3f = geometry::Point3<f64>;
pub type Point3f32 = geometry::Point3<f32>;
pub type Posef = geometry::Pose<f64>;
pub type Posef32 = geometry::Pose<f32>;
pub type PointCloudf = geometry::PointCloud<f64>;
pub type PointCloudf32 = geometry::PointCloud<f32>;
pub type Intrinsicsf = geometry::CameraIntrinsics<f64>;
pub type BBox3f = voxmap::BBox3D<f64>;
pub type SemanticMapf = voxmap::SemanticMap<f64>;
pub type FeatureMapf = cafusion::FeatureMap<f64>;
pub type FeatureMapf32 = cafusion::FeatureMap<f32>;
pub type FusionWeightsf = cafusion::FusionWeights<f64>;
