use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Real;
use crate::voxmap::MaterialLabel;

/// World-frame axis-aligned box carrying a material and object label.
#[derive(Debug, Clone, PartialEq)]
pub struct BBox3D<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
    pub material: MaterialLabel,
    pub object_label: String,
    pub confidence: T,
    pub source_frame: u64,
    pub box_id: u32,
}

impl<T: Real> BBox3D<T> {
    pub fn new(min: Point3<T>, max: Point3<T>, material: MaterialLabel, box_id: u32) -> Result<Self> {
        let b = Self {
            min,
            max,
            material,
            object_label: String::new(),
            confidence: T::one(),
            source_frame: 0,
            box_id,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.object_label = label.into();
        self
    }

    pub fn with_confidence(mut self, c: T) -> Self {
        self.confidence = c;
        self
    }

    pub fn with_frame(mut self, frame: u64) -> Self {
        self.source_frame = frame;
        self
    }

    /// Degenerate (zero-extent) boxes are allowed; inverted ones are not.
    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidInput(format!("box {} has non-finite corners", self.box_id)));
        }
        if self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z {
            return Err(Error::InvalidInput(format!("box {} has min > max", self.box_id)));
        }
        if !(self.confidence >= T::zero() && self.confidence <= T::one()) {
            return Err(Error::InvalidInput(format!(
                "box {} confidence {} outside [0, 1]",
                self.box_id, self.confidence
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn center(&self) -> Point3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn volume(&self) -> T {
        let d = self.max - self.min;
        d.x * d.y * d.z
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.volume() > T::zero())
    }

    /// Squared Euclidean distance from `p` to the box; zero inside.
    #[inline]
    pub fn distance_squared(&self, p: &Point3<T>) -> T {
        let axis = |v: T, lo: T, hi: T| {
            let d = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                T::zero()
            };
            d * d
        };
        axis(p.x, self.min.x, self.max.x) + axis(p.y, self.min.y, self.max.y) + axis(p.z, self.min.z, self.max.z)
    }

    pub fn distance(&self, p: &Point3<T>) -> T {
        self.distance_squared(p).sqrt()
    }

    /// Volumetric intersection over union.
    pub fn iou(&self, o: &Self) -> T {
        let lo = self.min.component_max(&o.min);
        let hi = self.max.component_min(&o.max);
        let ext = |a: T, b: T| (b - a).max(T::zero());
        let inter = ext(lo.x, hi.x) * ext(lo.y, hi.y) * ext(lo.z, hi.z);
        let union = self.volume() + o.volume() - inter;
        if union > T::zero() {
            inter / union
        } else if self.min == o.min && self.max == o.max {
            T::one()
        } else {
            T::zero()
        }
    }

    /// Axis-aligned bounds of a point set.
    pub fn enclosing(points: impl IntoIterator<Item = Point3<T>>) -> Option<(Point3<T>, Point3<T>)> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| (lo.component_min(&p), hi.component_max(&p))))
    }
}
