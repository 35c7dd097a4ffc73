use crate::error::{Error, Result};
use crate::voxmap::MaterialLabel;

const N: usize = MaterialLabel::COUNT;

/// Counts indexed `[gt][pred]` by material id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; N]; N],
}

impl ConfusionMatrix {
    pub fn get(&self, gt: MaterialLabel, pred: MaterialLabel) -> u64 {
        self.counts[gt.id() as usize][pred.id() as usize]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|r| r.to_vec()).collect()
    }

    pub fn row_sum(&self, gt: MaterialLabel) -> u64 {
        self.counts[gt.id() as usize].iter().sum()
    }

    pub fn column_sum(&self, pred: MaterialLabel) -> u64 {
        self.counts.iter().map(|r| r[pred.id() as usize]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(pred: &[MaterialLabel], gt: &[MaterialLabel]) -> Result<ConfusionMatrix> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predictions for {} ground-truth labels", pred.len(), gt.len())));
    }
    let mut counts = [[0u64; N]; N];
    for (p, g) in pred.iter().zip(gt) {
        counts[g.id() as usize][p.id() as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}
