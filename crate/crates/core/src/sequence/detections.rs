use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::voxmap::MaterialLabel;

/// Pixel-space box: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox2D<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> BBox2D<T> {
    /// Clips to `[0, width] x [0, height]`. Boxes already inside are
    /// returned unchanged, so parsing does not perturb their extents.
    pub fn clamp(&self, width: u32, height: u32) -> Self {
        let (w, h) = (T::lit(width as f64), T::lit(height as f64));
        if self.x >= T::zero() && self.y >= T::zero() && self.x + self.w <= w && self.y + self.h <= h {
            return *self;
        }
        let x0 = self.x.max(T::zero()).min(w);
        let y0 = self.y.max(T::zero()).min(h);
        let x1 = (self.x + self.w).max(T::zero()).min(w);
        let y1 = (self.y + self.h).max(T::zero()).min(h);
        Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D<T> {
    pub frame_id: u64,
    pub bbox: BBox2D<T>,
    pub object_label: String,
    pub confidence: T,
    pub material: Option<MaterialLabel>,
}

pub type DetectionMap<T> = BTreeMap<u64, Vec<Detection2D<T>>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BoxJson {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub label: String,
    pub conf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct FrameDetectionsJson {
    pub frame_id: u64,
    pub boxes: Vec<BoxJson>,
}

/// Parses JSON-lines detections, clamping every box to the image.
pub fn parse_detections<T: Real>(text: &str, width: u32, height: u32, path: &Path) -> Result<DetectionMap<T>> {
    let mut out = DetectionMap::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameDetectionsJson =
            serde_json::from_str(line).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        if out.contains_key(&rec.frame_id) {
            return Err(Error::parse(path, ln, format!("frame {} listed twice", rec.frame_id)));
        }
        let mut dets = Vec::with_capacity(rec.boxes.len());
        for (j, b) in rec.boxes.into_iter().enumerate() {
            if !(b.w > 0.0 && b.h > 0.0) {
                return Err(Error::parse(path, ln, format!("box {j}: width and height must be positive")));
            }
            if !(0.0..=1.0).contains(&b.conf) {
                return Err(Error::parse(path, ln, format!("box {j}: confidence {} outside [0, 1]", b.conf)));
            }
            let raw = BBox2D {
                x: T::lit(b.x),
                y: T::lit(b.y),
                w: T::lit(b.w),
                h: T::lit(b.h),
            };
            let bbox = raw.clamp(width, height);
            if !(bbox.w > T::zero() && bbox.h > T::zero()) {
                return Err(Error::parse(path, ln, format!("box {j} lies outside the {width}x{height} image")));
            }
            dets.push(Detection2D {
                frame_id: rec.frame_id,
                bbox,
                object_label: b.label,
                confidence: T::lit(b.conf),
                material: b.material,
            });
        }
        out.insert(rec.frame_id, dets);
    }
    Ok(out)
}

pub fn load_detections<T: Real>(path: &Path, width: u32, height: u32) -> Result<DetectionMap<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, width, height, path)
}

/// Canonical JSON-lines form, one frame per line in frame order.
pub fn detections_to_jsonl<T: Real>(dets: &DetectionMap<T>) -> String {
    let mut out = String::new();
    for (&frame_id, list) in dets {
        let rec = FrameDetectionsJson {
            frame_id,
            boxes: list
                .iter()
                .map(|d| BoxJson {
                    x: d.bbox.x.as_f64(),
                    y: d.bbox.y.as_f64(),
                    w: d.bbox.w.as_f64(),
                    h: d.bbox.h.as_f64(),
                    label: d.object_label.clone(),
                    conf: d.confidence.as_f64(),
                    material: d.material,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("dets.jsonl")
    }

    #[test]
    fn empty_file_is_empty_map() {
        assert!(parse_detections::<f64>("", 640, 480, p()).unwrap().is_empty());
        assert!(parse_detections::<f64>("\n\n", 640, 480, p()).unwrap().is_empty());
    }

    #[test]
    fn two_boxes_on_one_line() {
        let line = r#"{"frame_id": 3, "boxes": [{"x": 1, "y": 2, "w": 10, "h": 20, "label": "desk", "conf": 0.9, "material": "wood"}, {"x": 50, "y": 60, "w": 5, "h": 5, "label": "mat", "conf": 0.4}]}"#;
        let m = parse_detections::<f64>(line, 640, 480, p()).unwrap();
        let d = &m[&3];
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].material, Some(MaterialLabel::Wood));
        assert_eq!(d[1].material, None);
        assert_eq!(d[0].bbox, BBox2D { x: 1.0, y: 2.0, w: 10.0, h: 20.0 });
    }

    #[test]
    fn boxes_are_clamped() {
        let line = r#"{"frame_id": 0, "boxes": [{"x": -5, "y": 470, "w": 20, "h": 30, "label": "a", "conf": 1}]}"#;
        let d = &parse_detections::<f64>(line, 640, 480, p()).unwrap()[&0][0];
        // x: max(0, -5) = 0, min(640, 15) = 15; y: 470, min(480, 500) = 480
        assert_eq!(d.bbox, BBox2D { x: 0.0, y: 470.0, w: 15.0, h: 10.0 });
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"frame_id\": 0, \"boxes\": []}\n{\"frame_id\": 1, \"boxes\": [{]}\n";
        match parse_detections::<f64>(text, 640, 480, p()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        let bad_conf = r#"{"frame_id": 0, "boxes": [{"x": 0, "y": 0, "w": 1, "h": 1, "label": "a", "conf": 1.5}]}"#;
        assert!(parse_detections::<f64>(bad_conf, 640, 480, p()).is_err());
        let outside = r#"{"frame_id": 0, "boxes": [{"x": 700, "y": 0, "w": 1, "h": 1, "label": "a", "conf": 0.5}]}"#;
        assert!(parse_detections::<f64>(outside, 640, 480, p()).is_err());
        let dup = "{\"frame_id\": 0, \"boxes\": []}\n{\"frame_id\": 0, \"boxes\": []}\n";
        assert!(parse_detections::<f64>(dup, 640, 480, p()).is_err());
    }
}
