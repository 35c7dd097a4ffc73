use std::collections::BTreeMap;

use crate::scalar::Real;
use crate::voxmap::{BBox3D, MaterialLabel};

/// Default 3D IoU needed for a detection to count as a true positive.
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Per prediction (input order): matched gt index, if a true positive.
    pub matched: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn is_tp(&self, i: usize) -> bool {
        self.matched[i].is_some()
    }

    pub fn tp(&self) -> usize {
        self.matched.iter().filter(|m| m.is_some()).count()
    }

    pub fn fp(&self) -> usize {
        self.matched.len() - self.tp()
    }
}

/// Prediction indices by descending confidence, ties in input order.
pub fn confidence_order<T: Real>(pred: &[BBox3D<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].confidence.partial_cmp(&pred[a].confidence).expect("finite confidences"));
    order
}

/// Greedy matching: each prediction, most confident first, takes the
/// unmatched same-material gt box of highest IoU (lowest index on ties)
/// provided that IoU reaches `threshold`.
pub fn match_detections<T: Real>(pred: &[BBox3D<T>], gt: &[BBox3D<T>], threshold: f64) -> MatchResult {
    assert!(threshold > 0.0 && threshold <= 1.0, "iou threshold must be in (0, 1]");
    let mut taken = vec![false; gt.len()];
    let mut matched = vec![None; pred.len()];
    for i in confidence_order(pred) {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt.iter().enumerate() {
            if taken[j] || g.material != pred[i].material {
                continue;
            }
            let iou = pred[i].iou(g).as_f64();
            if iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
            matched[i] = Some(j);
        }
    }
    MatchResult { matched }
}

/// All-point interpolated AP of confidence-ranked (confidence, is_tp)
/// pairs against `n_gt` ground-truth instances.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut ranked: Vec<(f64, bool)> = scored.to_vec();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite confidences"));
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &(_, hit)) in ranked.iter().enumerate() {
        tp += usize::from(hit);
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // precision envelope, right to left
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    ap
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassDetection {
    pub ap: f64,
    pub n_gt: usize,
    pub n_det: usize,
    pub tp: usize,
    pub fp: usize,
}

/// Matching plus AP for every class that has a gt box or a prediction.
/// AP is reported only for classes with at least one gt instance.
pub fn detection_metrics<T: Real>(
    pred: &[BBox3D<T>],
    gt: &[BBox3D<T>],
    threshold: f64,
) -> BTreeMap<MaterialLabel, (ClassDetection, bool)> {
    let m = match_detections(pred, gt, threshold);
    let mut out = BTreeMap::new();
    for label in MaterialLabel::ALL {
        let n_gt = gt.iter().filter(|g| g.material == label).count();
        let scored: Vec<(f64, bool)> = pred
            .iter()
            .enumerate()
            .filter(|(_, p)| p.material == label)
            .map(|(i, p)| (p.confidence.as_f64(), m.is_tp(i)))
            .collect();
        if n_gt == 0 && scored.is_empty() {
            continue;
        }
        let tp = scored.iter().filter(|s| s.1).count();
        let d = ClassDetection {
            ap: average_precision(&scored, n_gt),
            n_gt,
            n_det: scored.len(),
            tp,
            fp: scored.len() - tp,
        };
        if n_gt == 0 {
            log::debug!("class {label} has no ground truth; excluded from mAP");
        }
        out.insert(label, (d, n_gt > 0));
    }
    out
}

/// Unweighted mean AP over classes with ground truth.
pub fn mean_average_precision(per_class: &BTreeMap<MaterialLabel, (ClassDetection, bool)>) -> Option<f64> {
    let aps: Vec<f64> = per_class.values().filter(|(_, has_gt)| *has_gt).map(|(d, _)| d.ap).collect();
    if aps.is_empty() {
        None
    } else {
        Some(aps.iter().sum::<f64>() / aps.len() as f64)
    }
}
