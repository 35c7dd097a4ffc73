use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Real;

/// Pinhole intrinsics. Camera looks down +z, x right, y down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let w = T::lit(self.width as f64);
        let h = T::lit(self.height as f64);
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= T::zero() && self.cx < w && self.cy >= T::zero() && self.cy < h) {
            return Err(Error::InvalidInput(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains_pixel(&self, u: T, v: T) -> bool {
        u >= T::zero()
            && v >= T::zero()
            && u < T::lit(self.width as f64)
            && v < T::lit(self.height as f64)
    }

    /// Inverse pinhole: pixel plus metric depth to a camera-frame point.
    pub fn back_project(&self, u: T, v: T, depth: T) -> Result<Point3<T>> {
        if !(depth > T::zero()) || !depth.is_finite() {
            return Err(Error::InvalidInput(format!("depth must be positive, got {depth}")));
        }
        if !self.contains_pixel(u, v) {
            return Err(Error::InvalidInput(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Point3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Forward pinhole. Returns `None` for points at or behind the camera.
    pub fn project(&self, p: Point3<T>) -> Option<(T, T)> {
        if !(p.z > T::zero()) {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// `CameraIntrinsics::back_project` as a free function.
pub fn back_project_pixel<T: Real>(
    u: T,
    v: T,
    depth: T,
    intr: &CameraIntrinsics<T>,
) -> Result<Point3<T>> {
    intr.back_project(u, v, depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tum() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).unwrap()
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let p = tum().back_project(319.5, 239.5, 2.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn one_focal_length_off_center() {
        let intr = tum();
        let p = intr.back_project(intr.cx + intr.fx, intr.cy, 1.0);
        // cx + fx is beyond the image width here, so use a narrower focal length.
        assert!(p.is_err());
        let intr = CameraIntrinsics::new(200.0, 200.0, 319.5, 239.5, 640, 480).unwrap();
        let p = intr.back_project(intr.cx + intr.fx, intr.cy, 1.0).unwrap();
        assert_eq!(p, Point3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn matches_scalar_oracle() {
        // (100 - 319.5) * 1.5 / 525 and (200 - 239.5) * 1.5 / 525, worked by hand.
        let p = tum().back_project(100.0, 200.0, 1.5).unwrap();
        let ex = -219.5 * 1.5 / 525.0;
        let ey = -39.5 * 1.5 / 525.0;
        assert!((p.x - ex).abs() < 1e-15);
        assert!((p.y - ey).abs() < 1e-15);
        assert!((p.x - (-0.627_142_857_142_857_1)).abs() < 1e-12);
        assert!((p.y - (-0.112_857_142_857_142_86)).abs() < 1e-12);
        assert_eq!(p.z, 1.5);
    }

    #[test]
    fn error_paths() {
        let intr = tum();
        assert!(intr.back_project(10.0, 10.0, 0.0).is_err());
        assert!(intr.back_project(10.0, 10.0, -1.0).is_err());
        assert!(intr.back_project(640.0, 10.0, 1.0).is_err());
        assert!(intr.back_project(-0.5, 10.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }
}
