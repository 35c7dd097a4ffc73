use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::eval::iou::{gt_owner, gt_point_labels};
use crate::eval::{confusion_matrix, detection_metrics, iou_from_labels, mean_average_precision, mean_iou, StageTimings};
use crate::scalar::Real;
use crate::sequence::GroundTruthMap;
use crate::voxmap::{BBox3D, MaterialLabel, SemanticMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub iou: Option<f64>,
    pub ap: Option<f64>,
    pub n_gt: usize,
    pub n_det: usize,
    pub tp: usize,
    pub fp: usize,
}

/// Evaluation summary. Serialized field order is fixed, so equal reports
/// produce identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub gt_mode: String,
    pub n_points: usize,
    pub n_clusters: usize,
    pub n_gt_objects: usize,
    pub per_class: BTreeMap<MaterialLabel, ClassMetrics>,
    pub mean_iou: Option<f64>,
    pub map: Option<f64>,
    pub n_detections: usize,
    pub tp: usize,
    pub fp: usize,
    /// `[gt][pred]` object counts by material id, per-object gt only.
    pub confusion: Option<Vec<Vec<u64>>>,
    pub timings_ms: Option<serde_json::Value>,
}

impl MetricsReport {
    pub fn with_timings(mut self, t: &StageTimings) -> Self {
        self.timings_ms = Some(t.to_json());
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// One box per cluster: the AABB of its points grown by `pad` on every
/// side, labeled with the cluster material, scored by size relative to the
/// largest cluster. Padding by half a voxel gives surface-only clusters of
/// thin objects a non-degenerate extent.
pub fn cluster_boxes<T: Real>(map: &SemanticMap<T>, pad: T) -> Vec<BBox3D<T>> {
    let grow = crate::geometry::Point3::new(pad, pad, pad);
    let k = map.num_clusters();
    let mut bounds: Vec<Option<(crate::geometry::Point3<T>, crate::geometry::Point3<T>)>> = vec![None; k];
    let mut sizes = vec![0usize; k];
    for (p, c) in map.cloud().points().iter().zip(map.cluster_ids()) {
        let Some(c) = c else { continue };
        let c = *c as usize;
        sizes[c] += 1;
        bounds[c] = Some(match bounds[c] {
            None => (*p, *p),
            Some((lo, hi)) => (lo.component_min(p), hi.component_max(p)),
        });
    }
    let largest = sizes.iter().copied().max().unwrap_or(1).max(1) as f64;
    bounds
        .into_iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let (lo, hi) = b?;
            let label = &map.clusters()[i];
            let mut bx = BBox3D::new(lo - grow, hi + grow, label.material, i as u32)
                .expect("bounds are ordered")
                .with_confidence(T::lit(sizes[i] as f64 / largest));
            if let Some(l) = &label.object_label {
                bx = bx.with_label(l.clone());
            }
            Some(bx)
        })
        .collect()
}

/// Majority predicted material inside each gt object (ties to the lower id;
/// `Other` when the object has no points).
pub fn object_predictions<T: Real>(map: &SemanticMap<T>, gt: &[BBox3D<T>]) -> Vec<MaterialLabel> {
    let owner = gt_owner(map.cloud().points(), gt);
    let mut votes = vec![[0usize; MaterialLabel::COUNT]; gt.len()];
    for (o, m) in owner.iter().zip(map.materials()) {
        if let Some(o) = o {
            votes[*o][m.id() as usize] += 1;
        }
    }
    votes
        .iter()
        .map(|v| {
            let mut best = MaterialLabel::COUNT - 1;
            let mut n = 0;
            for (k, &c) in v.iter().enumerate() {
                if c > n {
                    n = c;
                    best = k;
                }
            }
            MaterialLabel::ALL[best]
        })
        .collect()
}

/// Full evaluation of a map against ground truth. Cluster boxes are padded
/// by `box_pad` (see [`cluster_boxes`]). Timings are left empty.
pub fn evaluate_map<T: Real>(
    map: &SemanticMap<T>,
    gt: &GroundTruthMap<T>,
    match_iou: f64,
    box_pad: T,
) -> Result<MetricsReport> {
    let gt_labels = gt_point_labels(map, gt)?;
    let iou = iou_from_labels(map.materials(), &gt_labels)?;
    let preds = cluster_boxes(map, box_pad);
    let gt_boxes = gt.objects();
    let det = if gt_boxes.is_empty() {
        BTreeMap::new()
    } else {
        detection_metrics(&preds, gt_boxes, match_iou)
    };
    let mut per_class = BTreeMap::new();
    for m in MaterialLabel::ALL {
        let i = iou.get(&m).copied();
        let d = det.get(&m);
        if i.is_none() && d.is_none() {
            continue;
        }
        per_class.insert(
            m,
            ClassMetrics {
                iou: i,
                ap: d.filter(|(_, has_gt)| *has_gt).map(|(d, _)| d.ap),
                n_gt: d.map_or(0, |(d, _)| d.n_gt),
                n_det: d.map_or(0, |(d, _)| d.n_det),
                tp: d.map_or(0, |(d, _)| d.tp),
                fp: d.map_or(0, |(d, _)| d.fp),
            },
        );
    }
    let (tp, fp) = det.values().fold((0, 0), |(t, f), (d, _)| (t + d.tp, f + d.fp));
    let confusion = if gt_boxes.is_empty() {
        None
    } else {
        let gt_mats: Vec<MaterialLabel> = gt_boxes.iter().map(|b| b.material).collect();
        Some(confusion_matrix(&object_predictions(map, gt_boxes), &gt_mats)?.rows())
    };
    Ok(MetricsReport {
        gt_mode: gt.mode().to_string(),
        n_points: map.len(),
        n_clusters: map.num_clusters(),
        n_gt_objects: gt_boxes.len(),
        per_class,
        mean_iou: mean_iou(&iou, &gt_labels),
        map: mean_average_precision(&det),
        n_detections: if gt_boxes.is_empty() { preds.len() } else { tp + fp },
        tp,
        fp,
        confusion,
        timings_ms: None,
    })
}

/// Report for a run with nothing to evaluate.
pub fn empty_report(gt_mode: &str) -> MetricsReport {
    MetricsReport {
        gt_mode: gt_mode.to_string(),
        n_points: 0,
        n_clusters: 0,
        n_gt_objects: 0,
        per_class: BTreeMap::new(),
        mean_iou: None,
        map: None,
        n_detections: 0,
        tp: 0,
        fp: 0,
        confusion: None,
        timings_ms: None,
    }
}
