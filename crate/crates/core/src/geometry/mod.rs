//! Camera geometry, depth back-projection, point clouds and their file formats.

mod camera;
mod cloud;
mod image;
pub mod ply;
mod point;

pub use camera::{back_project_pixel, CameraIntrinsics};
pub use cloud::{depth_to_cloud, depth_to_cloud_colored, DepthSampling, PointCloud};
pub use image::{DepthImage, RgbImage};
pub use ply::{read_ply, write_ply, PlyData};
pub use point::{transform_point, Point3, Pose};
