use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::detections::{detections_to_jsonl, parse_detections, DetectionMap};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord<T> {
    pub frame_id: u64,
    pub timestamp: f64,
    pub rgb_path: PathBuf,
    pub depth_path: PathBuf,
    pub pose: Pose<T>,
}

/// A validated recording: intrinsics, time-ordered frames and their detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T> {
    pub intrinsics: CameraIntrinsics<T>,
    pub frames: Vec<FrameRecord<T>>,
    pub detections: DetectionMap<T>,
    /// Directory relative frame paths are resolved against.
    pub base_dir: PathBuf,
    /// Detections file name as written in the manifest.
    pub detections_file: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameJson {
    frame_id: u64,
    t: f64,
    rgb: String,
    depth: String,
    pose: [f64; 7],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestJson {
    intrinsics: IntrinsicsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detections: Option<String>,
    frames: Vec<FrameJson>,
}

impl<T: Real> Sequence<T> {
    pub fn frame(&self, frame_id: u64) -> Option<&FrameRecord<T>> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn num_detections(&self) -> usize {
        self.detections.values().map(Vec::len).sum()
    }

    /// Canonical manifest text. Paths are written as stored.
    pub fn to_manifest_json(&self) -> String {
        let i = &self.intrinsics;
        let m = ManifestJson {
            intrinsics: IntrinsicsJson {
                fx: i.fx.as_f64(),
                fy: i.fy.as_f64(),
                cx: i.cx.as_f64(),
                cy: i.cy.as_f64(),
                width: i.width,
                height: i.height,
            },
            detections: self.detections_file.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| FrameJson {
                    frame_id: f.frame_id,
                    t: f.timestamp,
                    rgb: f.rgb_path.to_string_lossy().into_owned(),
                    depth: f.depth_path.to_string_lossy().into_owned(),
                    pose: f.pose.to_tum().map(|v| v.as_f64()),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&m).expect("serializable");
        s.push('\n');
        s
    }

    pub fn detections_jsonl(&self) -> String {
        detections_to_jsonl(&self.detections)
    }

    /// Writes the manifest (and detections file, if named) into `dir`.
    pub fn save(&self, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
        let path = dir.join(manifest_name);
        fs::write(&path, self.to_manifest_json()).map_err(|e| Error::io(&path, e))?;
        if let Some(name) = &self.detections_file {
            let dpath = dir.join(name);
            fs::write(&dpath, self.detections_jsonl()).map_err(|e| Error::io(&dpath, e))?;
        }
        Ok(path)
    }
}

/// Parses manifest text. `detections` supplies the contents of the named
/// detections file when the manifest references one.
pub fn parse_manifest<T: Real>(
    text: &str,
    path: &Path,
    detections: Option<(&str, &Path)>,
) -> Result<Sequence<T>> {
    let m: ManifestJson = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let ij = &m.intrinsics;
    let intrinsics = CameraIntrinsics::new(T::lit(ij.fx), T::lit(ij.fy), T::lit(ij.cx), T::lit(ij.cy), ij.width, ij.height)
        .map_err(|e| Error::parse(path, 0, format!("intrinsics: {e}")))?;

    let mut frames = Vec::with_capacity(m.frames.len());
    for (k, f) in m.frames.iter().enumerate() {
        let pose = Pose::from_tum(f.pose.map(T::lit)).map_err(|e| Error::parse(path, 0, format!("frame {}: {e}", f.frame_id)))?;
        if let Some(prev) = frames.last() {
            let prev: &FrameRecord<T> = prev;
            if !(f.t > prev.timestamp) {
                return Err(Error::parse(
                    path,
                    0,
                    format!("frame {} (index {k}): timestamp {} not after {}", f.frame_id, f.t, prev.timestamp),
                ));
            }
        }
        if frames.iter().any(|g: &FrameRecord<T>| g.frame_id == f.frame_id) {
            return Err(Error::parse(path, 0, format!("duplicate frame_id {}", f.frame_id)));
        }
        if !f.t.is_finite() {
            return Err(Error::parse(path, 0, format!("frame {}: non-finite timestamp", f.frame_id)));
        }
        frames.push(FrameRecord {
            frame_id: f.frame_id,
            timestamp: f.t,
            rgb_path: PathBuf::from(&f.rgb),
            depth_path: PathBuf::from(&f.depth),
            pose,
        });
    }

    let dets = match (&m.detections, detections) {
        (Some(_), Some((text, dpath))) => parse_detections(text, intrinsics.width, intrinsics.height, dpath)?,
        (Some(name), None) => {
            return Err(Error::parse(path, 0, format!("detections file '{name}' not supplied")));
        }
        (None, _) => DetectionMap::new(),
    };
    for &fid in dets.keys() {
        if !frames.iter().any(|f| f.frame_id == fid) {
            return Err(Error::parse(path, 0, format!("detections reference unknown frame_id {fid}")));
        }
    }
    Ok(Sequence {
        intrinsics,
        frames,
        detections: dets,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        detections_file: m.detections,
    })
}

pub fn load_manifest<T: Real>(path: &Path) -> Result<Sequence<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let det_name = probe.get("detections").and_then(|v| v.as_str()).map(str::to_owned);
    match det_name {
        Some(name) => {
            let dpath = path.parent().unwrap_or(Path::new("")).join(&name);
            let dtext = fs::read_to_string(&dpath).map_err(|e| Error::io(&dpath, e))?;
            parse_manifest(&text, path, Some((&dtext, &dpath)))
        }
        None => parse_manifest(&text, path, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "intrinsics": {"fx": 525, "fy": 525, "cx": 319.5, "cy": 239.5, "width": 640, "height": 480},
        "frames": [{"frame_id": 0, "t": 0.0, "rgb": "rgb/0.ppm", "depth": "depth/0.pgm", "pose": [0, 0, 0, 0, 0, 0, 1]}]
    }"#;

    #[test]
    fn minimal_manifest() {
        let s = parse_manifest::<f64>(MINIMAL, Path::new("/data/seq/manifest.json"), None).unwrap();
        assert_eq!(s.frames.len(), 1);
        assert!(s.detections.is_empty());
        assert_eq!(s.resolve(&s.frames[0].depth_path), PathBuf::from("/data/seq/depth/0.pgm"));
    }

    #[test]
    fn dangling_detection_names_the_frame() {
        let text = MINIMAL.replace("\"frames\"", "\"detections\": \"d.jsonl\", \"frames\"");
        let dets = r#"{"frame_id": 42, "boxes": []}"#;
        let err = parse_manifest::<f64>(&text, Path::new("m.json"), Some((dets, Path::new("d.jsonl")))).unwrap_err();
        assert!(err.to_string().contains("42"), "{err}");
    }

    #[test]
    fn validation_errors() {
        let missing = MINIMAL.replace("\"fy\": 525, ", "");
        assert!(matches!(parse_manifest::<f64>(&missing, Path::new("m.json"), None), Err(Error::Parse { .. })));

        let two = MINIMAL.replace(
            "\"pose\": [0, 0, 0, 0, 0, 0, 1]}]",
            "\"pose\": [0, 0, 0, 0, 0, 0, 1]}, {\"frame_id\": 1, \"t\": 0.0, \"rgb\": \"a\", \"depth\": \"b\", \"pose\": [0, 0, 0, 0, 0, 0, 1]}]",
        );
        let err = parse_manifest::<f64>(&two, Path::new("m.json"), None).unwrap_err();
        assert!(err.to_string().contains("timestamp"), "{err}");

        let bad_q = MINIMAL.replace("[0, 0, 0, 0, 0, 0, 1]", "[0, 0, 0, 0, 0, 0, 2]");
        assert!(parse_manifest::<f64>(&bad_q, Path::new("m.json"), None).is_err());
    }
}
