//! Recorded-sequence ingestion: a JSON manifest (intrinsics and frames),
//! JSON-lines detections, and JSON-lines ground truth / 3D box files.
//!
//! Manifest:
//!
//! ```json
//! {
//!   "intrinsics": {"fx": 525.0, "fy": 525.0, "cx": 319.5, "cy": 239.5, "width": 640, "height": 480},
//!   "detections": "detections.jsonl",
//!   "frames": [
//!     {"frame_id": 0, "t": 0.0, "rgb": "rgb/0000.ppm", "depth": "depth/0000.pgm",
//!      "pose": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]}
//!   ]
//! }
//! ```
//!
//! `pose` is `tx ty tz qx qy qz qw` (camera to world). Relative paths are
//! resolved against the manifest's directory. Each detections line is
//! `{"frame_id": 0, "boxes": [{"x", "y", "w", "h", "label", "conf", "material"?}]}`.

mod boxes;
mod detections;
mod manifest;

pub use boxes::{load_boxes, load_groundtruth, parse_groundtruth, write_boxes, BoxRecord, GroundTruthMap};
pub use detections::{load_detections, parse_detections, BBox2D, Detection2D, DetectionMap};
pub use manifest::{load_manifest, parse_manifest, FrameRecord, Sequence};
