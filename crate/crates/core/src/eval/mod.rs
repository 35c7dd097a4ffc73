//! Map evaluation: point IoU, detection matching and AP, confusion counts
//! and stage timings.

mod confusion;
mod detection;
mod iou;
mod report;
mod timing;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use detection::{
    average_precision, confidence_order, detection_metrics, match_detections, mean_average_precision, ClassDetection,
    MatchResult, DEFAULT_MATCH_IOU,
};
pub use iou::{gt_owner, iou_from_labels, iou_per_class, mean_iou, rasterize_gt};
pub use report::{cluster_boxes, empty_report, evaluate_map, object_predictions, ClassMetrics, MetricsReport};
pub use timing::{StageTimer, StageTimings};
