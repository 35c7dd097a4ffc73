use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Point3, Pose, RgbImage};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<Point3<T>>,
    colors: Option<Vec<[u8; 3]>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>, colors: Option<Vec<[u8; 3]>>) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::Shape(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        Ok(Self { points, colors })
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn set_colors(&mut self, colors: Vec<[u8; 3]>) -> Result<()> {
        if colors.len() != self.points.len() {
            return Err(Error::Shape(format!(
                "{} colors for {} points",
                colors.len(),
                self.points.len()
            )));
        }
        self.colors = Some(colors);
        Ok(())
    }

    /// Appends `other`. Colors survive only if both clouds carry them
    /// (or `self` is empty).
    pub fn extend(&mut self, other: PointCloud<T>) {
        let was_empty = self.points.is_empty();
        self.colors = match (self.colors.take(), other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            (None, Some(b)) if was_empty => Some(b),
            _ => None,
        };
        self.points.extend(other.points);
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        if self.points.is_empty() {
            return None;
        }
        let n = T::lit(self.points.len() as f64);
        let sum = self.points.iter().fold(Point3::origin(), |acc, &p| acc + p);
        Some(sum * (T::one() / n))
    }
}

/// Pixel sampling and range gate for [`depth_to_cloud`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSampling<T> {
    pub stride: u32,
    pub min_depth: T,
    pub max_depth: T,
}

impl<T: Real> Default for DepthSampling<T> {
    fn default() -> Self {
        Self {
            stride: 4,
            min_depth: T::lit(0.3),
            max_depth: T::lit(5.0),
        }
    }
}

impl<T: Real> DepthSampling<T> {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.min_depth > T::zero() && self.min_depth < self.max_depth) {
            return Err(Error::Config(format!(
                "depth range must satisfy 0 < min < max (got {} .. {})",
                self.min_depth, self.max_depth
            )));
        }
        Ok(())
    }
}

/// Back-projects every `stride`-th pixel (row-major) with a valid in-range
/// depth into the world frame.
pub fn depth_to_cloud<T: Real>(
    depth: &DepthImage,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    sampling: &DepthSampling<T>,
) -> Result<PointCloud<T>> {
    depth_to_cloud_colored(depth, None, intr, pose, sampling)
}

/// As [`depth_to_cloud`], attaching per-point colors from an aligned RGB image.
pub fn depth_to_cloud_colored<T: Real>(
    depth: &DepthImage,
    rgb: Option<&RgbImage>,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    sampling: &DepthSampling<T>,
) -> Result<PointCloud<T>> {
    sampling.validate()?;
    if depth.width() != intr.width || depth.height() != intr.height {
        return Err(Error::Shape(format!(
            "depth image {}x{} does not match intrinsics {}x{}",
            depth.width(),
            depth.height(),
            intr.width,
            intr.height
        )));
    }
    if let Some(rgb) = rgb {
        if rgb.width() != depth.width() || rgb.height() != depth.height() {
            return Err(Error::Shape("rgb and depth images differ in size".into()));
        }
    }
    let mm = T::lit(1e-3);
    let mut points = Vec::new();
    let mut colors = rgb.map(|_| Vec::new());
    let step = sampling.stride as usize;
    for v in (0..depth.height()).step_by(step) {
        for u in (0..depth.width()).step_by(step) {
            let raw = depth.get(u, v);
            if raw == 0 {
                continue;
            }
            let d = T::lit(raw as f64) * mm;
            if d < sampling.min_depth || d > sampling.max_depth {
                continue;
            }
            let pc = intr.back_project(T::lit(u as f64), T::lit(v as f64), d)?;
            points.push(pose.transform_point(pc));
            if let (Some(c), Some(img)) = (colors.as_mut(), rgb) {
                c.push(img.get(u, v));
            }
        }
    }
    PointCloud::new(points, colors)
}
