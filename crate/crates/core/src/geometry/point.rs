use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point (or free vector) in meters. The frame is implied by context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    /// Like [`Point3::new`] but rejects NaN and infinite coordinates.
    pub fn try_new(x: T, y: T, z: T) -> Result<Self> {
        let p = Self { x, y, z };
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::InvalidInput(format!("non-finite point ({x}, {y}, {z})")))
        }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn distance(&self, o: &Self) -> T {
        (*self - *o).norm()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn cast<U: Real>(self) -> Point3<U> {
        Point3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }

    pub fn component_min(&self, o: &Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(&self, o: &Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl<T: Real> Add for Point3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Point3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Point3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Rigid camera-to-world transform: rotation as a unit quaternion, then translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    translation: Point3<T>,
    /// (qx, qy, qz, qw)
    rotation: [T; 4],
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            translation: Point3::origin(),
            rotation: [T::zero(), T::zero(), T::zero(), T::one()],
        }
    }

    /// Fails unless the quaternion has unit norm within 1e-6.
    pub fn new(translation: Point3<T>, rotation: [T; 4]) -> Result<Self> {
        let norm = rotation.iter().map(|&q| q * q).sum::<T>().sqrt();
        if !translation.is_finite() || !norm.is_finite() || (norm - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidInput(format!(
                "pose quaternion must be unit length (|q| = {norm})"
            )));
        }
        Ok(Self {
            translation,
            rotation,
        })
    }

    /// Accepts any nonzero quaternion and normalizes it.
    pub fn from_unnormalized(translation: Point3<T>, rotation: [T; 4]) -> Result<Self> {
        let norm = rotation.iter().map(|&q| q * q).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidInput("zero quaternion".into()));
        }
        Self::new(translation, rotation.map(|q| q / norm))
    }

    /// TUM layout: `tx ty tz qx qy qz qw`.
    pub fn from_tum(v: [T; 7]) -> Result<Self> {
        Self::new(Point3::new(v[0], v[1], v[2]), [v[3], v[4], v[5], v[6]])
    }

    pub fn to_tum(&self) -> [T; 7] {
        let t = self.translation;
        let q = self.rotation;
        [t.x, t.y, t.z, q[0], q[1], q[2], q[3]]
    }

    /// Rotation of `angle` radians about the world z axis.
    pub fn from_yaw(translation: Point3<T>, angle: T) -> Self {
        let h = angle / T::lit(2.0);
        Self {
            translation,
            rotation: [T::zero(), T::zero(), h.sin(), h.cos()],
        }
    }

    pub fn translation(&self) -> Point3<T> {
        self.translation
    }

    pub fn rotation(&self) -> [T; 4] {
        self.rotation
    }

    /// Rotates `p` then translates it.
    pub fn transform_point(&self, p: Point3<T>) -> Point3<T> {
        self.rotate(p) + self.translation
    }

    /// v' = v + 2w (q × v) + 2 q × (q × v)
    pub fn rotate(&self, v: Point3<T>) -> Point3<T> {
        let [qx, qy, qz, qw] = self.rotation;
        let q = Point3::new(qx, qy, qz);
        let two = T::lit(2.0);
        let t = q.cross(&v) * two;
        v + t * qw + q.cross(&t)
    }

    /// Composes `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        let [ax, ay, az, aw] = self.rotation;
        let [bx, by, bz, bw] = other.rotation;
        let q = [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ];
        let norm = q.iter().map(|&c| c * c).sum::<T>().sqrt();
        Pose {
            translation: self.transform_point(other.translation),
            rotation: q.map(|c| c / norm),
        }
    }
}

/// `transform_point` as a free function.
pub fn transform_point<T: Real>(pose: &Pose<T>, p: Point3<T>) -> Point3<T> {
    pose.transform_point(p)
}
