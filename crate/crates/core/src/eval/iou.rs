use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Real;
use crate::sequence::GroundTruthMap;
use crate::voxmap::{BBox3D, MaterialLabel, SemanticMap};

/// Per-point gt label from object boxes. A point in several boxes takes
/// the smallest-volume one (ties to the lower box id); points outside
/// every box are unlabeled.
pub fn rasterize_gt<T: Real>(points: &[Point3<T>], gt: &[BBox3D<T>]) -> Vec<Option<MaterialLabel>> {
    gt_owner(points, gt).into_iter().map(|o| o.map(|i| gt[i].material)).collect()
}

/// Index of the gt box owning each point under the [`rasterize_gt`] rule.
pub fn gt_owner<T: Real>(points: &[Point3<T>], gt: &[BBox3D<T>]) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..gt.len()).collect();
    order.sort_by(|&a, &b| {
        gt[a]
            .volume()
            .partial_cmp(&gt[b].volume())
            .expect("finite volumes")
            .then(gt[a].box_id.cmp(&gt[b].box_id))
    });
    points.iter().map(|p| order.iter().copied().find(|&i| gt[i].contains(p))).collect()
}

/// IoU of the per-point label sets, for every class present in either.
/// Points without a gt label are left out of both sides.
pub fn iou_from_labels(pred: &[MaterialLabel], gt: &[Option<MaterialLabel>]) -> Result<BTreeMap<MaterialLabel, f64>> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "prediction has {} points, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut inter = [0usize; MaterialLabel::COUNT];
    let mut n_pred = [0usize; MaterialLabel::COUNT];
    let mut n_gt = [0usize; MaterialLabel::COUNT];
    for (&p, g) in pred.iter().zip(gt) {
        let Some(g) = g else { continue };
        n_pred[p.id() as usize] += 1;
        n_gt[g.id() as usize] += 1;
        if p == *g {
            inter[p.id() as usize] += 1;
        }
    }
    let mut out = BTreeMap::new();
    for m in MaterialLabel::ALL {
        let k = m.id() as usize;
        let union = n_pred[k] + n_gt[k] - inter[k];
        if union > 0 {
            out.insert(m, inter[k] as f64 / union as f64);
        }
    }
    Ok(out)
}

/// Per-class point IoU of a map against ground truth.
pub fn iou_per_class<T: Real>(pred: &SemanticMap<T>, gt: &GroundTruthMap<T>) -> Result<BTreeMap<MaterialLabel, f64>> {
    iou_from_labels(pred.materials(), &gt_point_labels(pred, gt)?)
}

pub(crate) fn gt_point_labels<T: Real>(pred: &SemanticMap<T>, gt: &GroundTruthMap<T>) -> Result<Vec<Option<MaterialLabel>>> {
    match gt {
        GroundTruthMap::Objects(boxes) => {
            let labels = rasterize_gt(pred.cloud().points(), boxes);
            if !pred.is_empty() && labels.iter().all(Option::is_none) {
                return Err(Error::InvalidInput("no predicted point lies inside any ground-truth box".into()));
            }
            Ok(labels)
        }
        GroundTruthMap::PerPoint(labels) => {
            if labels.len() != pred.len() {
                return Err(Error::Shape(format!(
                    "per-point ground truth has {} labels for {} points",
                    labels.len(),
                    pred.len()
                )));
            }
            Ok(labels.iter().copied().map(Some).collect())
        }
    }
}

/// Unweighted mean IoU over the classes that have ground-truth points.
/// Predicted-only classes stay in the per-class table but not in the mean.
pub fn mean_iou(per_class: &BTreeMap<MaterialLabel, f64>, gt: &[Option<MaterialLabel>]) -> Option<f64> {
    let present: BTreeSet<MaterialLabel> = gt.iter().flatten().copied().collect();
    let vals: Vec<f64> = per_class.iter().filter(|(m, _)| present.contains(m)).map(|(_, v)| *v).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}
