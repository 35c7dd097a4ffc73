use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Real;
use crate::voxmap::{BBox3D, MaterialLabel};

/// One line of a ground-truth or 3D box file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub id: u32,
    pub object: String,
    pub material: MaterialLabel,
    pub min: [f64; 3],
    pub max: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<u64>,
}

impl BoxRecord {
    fn into_bbox<T: Real>(self) -> Result<BBox3D<T>> {
        let b = BBox3D {
            min: Point3::from_array(self.min.map(T::lit)),
            max: Point3::from_array(self.max.map(T::lit)),
            material: self.material,
            object_label: self.object,
            confidence: T::lit(self.conf.unwrap_or(1.0)),
            source_frame: self.frame.unwrap_or(0),
            box_id: self.id,
        };
        b.validate()?;
        Ok(b)
    }

    fn from_bbox<T: Real>(b: &BBox3D<T>, with_meta: bool) -> Self {
        Self {
            id: b.box_id,
            object: b.object_label.clone(),
            material: b.material,
            min: b.min.to_array().map(|v| v.as_f64()),
            max: b.max.to_array().map(|v| v.as_f64()),
            conf: with_meta.then(|| b.confidence.as_f64()),
            frame: with_meta.then_some(b.source_frame),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointLabelsRecord {
    point_labels: Vec<MaterialLabel>,
}

/// Ground truth either as labeled object boxes or as one label per point
/// of a reference cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruthMap<T> {
    Objects(Vec<BBox3D<T>>),
    PerPoint(Vec<MaterialLabel>),
}

impl<T: Real> GroundTruthMap<T> {
    pub fn mode(&self) -> &'static str {
        match self {
            GroundTruthMap::Objects(_) => "per_object",
            GroundTruthMap::PerPoint(_) => "per_point",
        }
    }

    pub fn objects(&self) -> &[BBox3D<T>] {
        match self {
            GroundTruthMap::Objects(o) => o,
            GroundTruthMap::PerPoint(_) => &[],
        }
    }

    pub fn to_jsonl(&self) -> String {
        match self {
            GroundTruthMap::Objects(objs) => boxes_to_jsonl(objs, false),
            GroundTruthMap::PerPoint(labels) => {
                let mut s = serde_json::to_string(&serde_json::json!({ "point_labels": labels })).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

fn boxes_to_jsonl<T: Real>(boxes: &[BBox3D<T>], with_meta: bool) -> String {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&serde_json::to_string(&BoxRecord::from_bbox(b, with_meta)).expect("serializable"));
        out.push('\n');
    }
    out
}

fn parse_box_lines<T: Real>(text: &str, path: &Path) -> Result<Vec<BBox3D<T>>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BoxRecord = serde_json::from_str(line).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        if !seen.insert(rec.id) {
            return Err(Error::parse(path, ln, format!("duplicate object id {}", rec.id)));
        }
        out.push(rec.into_bbox().map_err(|e| Error::parse(path, ln, e.to_string()))?);
    }
    Ok(out)
}

pub fn parse_groundtruth<T: Real>(text: &str, path: &Path) -> Result<GroundTruthMap<T>> {
    let first = text.lines().enumerate().find(|(_, l)| !l.trim().is_empty());
    let Some((first_ln, first_line)) = first else {
        return Err(Error::parse(path, 1, "ground truth is empty; at least one labeled object is required"));
    };
    if first_line.contains("\"point_labels\"") {
        let rec: PointLabelsRecord =
            serde_json::from_str(first_line).map_err(|e| Error::parse(path, first_ln + 1, e.to_string()))?;
        if let Some((ln, _)) = text.lines().enumerate().skip(first_ln + 1).find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::parse(path, ln + 1, "per-point ground truth must be a single record"));
        }
        if rec.point_labels.is_empty() {
            return Err(Error::parse(path, first_ln + 1, "point_labels is empty"));
        }
        return Ok(GroundTruthMap::PerPoint(rec.point_labels));
    }
    Ok(GroundTruthMap::Objects(parse_box_lines(text, path)?))
}

pub fn load_groundtruth<T: Real>(path: &Path) -> Result<GroundTruthMap<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_groundtruth(&text, path)
}

/// Loads a 3D box file (same line format as object ground truth; `conf`
/// and `frame` optional). An empty file yields no boxes.
pub fn load_boxes<T: Real>(path: &Path) -> Result<Vec<BBox3D<T>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_box_lines(&text, path)
}

pub fn write_boxes<T: Real>(boxes: &[BBox3D<T>], path: &Path) -> Result<()> {
    fs::write(path, boxes_to_jsonl(boxes, true)).map_err(|e| Error::io(path, e))
}
