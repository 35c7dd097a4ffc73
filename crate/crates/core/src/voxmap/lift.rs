//! 2D detection to world-frame 3D box.
//!
//! Depth estimate is the median of valid in-range depths inside the 2D box,
//! depth extent the [10th, 90th] percentile of those depths, and lateral
//! extent the box corners back-projected at the median depth.

use crate::geometry::{CameraIntrinsics, DepthImage, DepthSampling, Point3, Pose};
use crate::scalar::Real;
use crate::sequence::Detection2D;
use crate::voxmap::{BBox3D, MaterialLabel};

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile<T: Real>(sorted: &[T], q: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Lifts one detection. Returns `None` when the box covers no valid depth.
pub fn lift_detection<T: Real>(
    det: &Detection2D<T>,
    material: MaterialLabel,
    depth: &DepthImage,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    gate: &DepthSampling<T>,
    box_id: u32,
) -> Option<BBox3D<T>> {
    let b = det.bbox;
    let to_px = |v: T, max: u32| v.max(T::zero()).min(T::lit(max as f64)).to_u32().unwrap_or(0);
    let (u0, v0) = (to_px(b.x.floor(), depth.width()), to_px(b.y.floor(), depth.height()));
    let (u1, v1) = (to_px((b.x + b.w).ceil(), depth.width()), to_px((b.y + b.h).ceil(), depth.height()));
    let mm = T::lit(1e-3);
    let mut depths: Vec<T> = Vec::new();
    for v in v0..v1 {
        for u in u0..u1 {
            let raw = depth.get(u, v);
            if raw == 0 {
                continue;
            }
            let d = T::lit(raw as f64) * mm;
            if d >= gate.min_depth && d <= gate.max_depth {
                depths.push(d);
            }
        }
    }
    depths.sort_by(|a, c| a.partial_cmp(c).expect("finite depths"));
    let median = percentile(&depths, 0.5)?;
    let near = percentile(&depths, 0.1)?;
    let far = percentile(&depths, 0.9)?;

    let xs = [(b.x - intr.cx) * median / intr.fx, (b.x + b.w - intr.cx) * median / intr.fx];
    let ys = [(b.y - intr.cy) * median / intr.fy, (b.y + b.h - intr.cy) * median / intr.fy];
    let mut corners = Vec::with_capacity(8);
    for &x in &xs {
        for &y in &ys {
            for &z in &[near, far] {
                corners.push(pose.transform_point(Point3::new(x, y, z)));
            }
        }
    }
    let (min, max) = BBox3D::enclosing(corners)?;
    Some(BBox3D {
        min,
        max,
        material,
        object_label: det.object_label.clone(),
        confidence: det.confidence,
        source_frame: det.frame_id,
        box_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::BBox2D;

    #[test]
    fn percentiles() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), Some(3.0));
        assert!((percentile(&v, 0.1).unwrap() - 1.4).abs() < 1e-12);
        assert!((percentile(&v, 0.9).unwrap() - 4.6).abs() < 1e-12);
        assert_eq!(percentile::<f64>(&[], 0.5), None);
    }

    #[test]
    fn constant_depth_box() {
        let intr = CameraIntrinsics::<f64>::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let mut depth = DepthImage::zeros(100, 100);
        for v in 40..60 {
            for u in 30..50 {
                depth.set(u, v, 2000);
            }
        }
        let det = Detection2D {
            frame_id: 7,
            bbox: BBox2D { x: 30.0, y: 40.0, w: 20.0, h: 20.0 },
            object_label: "box".into(),
            confidence: 0.8,
            material: None,
        };
        let b = lift_detection(&det, MaterialLabel::Cardboard, &depth, &intr, &Pose::identity(), &DepthSampling::default(), 3).unwrap();
        assert!((b.min.x - (-0.4)).abs() < 1e-12 && (b.max.x - 0.0).abs() < 1e-12);
        assert!((b.min.y - (-0.2)).abs() < 1e-12 && (b.max.y - 0.2).abs() < 1e-12);
        assert_eq!((b.min.z, b.max.z), (2.0, 2.0));
        assert_eq!((b.box_id, b.source_frame, b.material), (3, 7, MaterialLabel::Cardboard));

        let empty = Detection2D { bbox: BBox2D { x: 80.0, y: 80.0, w: 5.0, h: 5.0 }, ..det };
        assert!(lift_detection(&empty, MaterialLabel::Wood, &depth, &intr, &Pose::identity(), &DepthSampling::default(), 0).is_none());
    }
}
