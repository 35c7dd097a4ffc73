use rand::Rng;

use crate::cafusion::FeatureMap;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::voxmap::MaterialLabel;

/// Below this top probability a prediction is reported as `Other`.
pub const CONFIDENCE_FLOOR: f64 = 0.5;

/// Number of concrete material classes scored by the head.
pub const NUM_CLASSES: usize = 10;

/// Dense layer from pooled fused features to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<T> {
    inputs: usize,
    /// Row-major `NUM_CLASSES x inputs`.
    weights: Vec<T>,
    bias: [T; NUM_CLASSES],
}

impl<T: Real> LinearHead<T> {
    pub fn new(inputs: usize, weights: Vec<T>, bias: [T; NUM_CLASSES]) -> Result<Self> {
        if inputs == 0 || weights.len() != NUM_CLASSES * inputs {
            return Err(Error::Shape(format!(
                "head over {inputs} inputs needs {} weights, got {}",
                NUM_CLASSES * inputs,
                weights.len()
            )));
        }
        Ok(Self { inputs, weights, bias })
    }

    pub fn random(rng: &mut impl Rng, inputs: usize, scale: f64) -> Self {
        Self {
            inputs,
            weights: (0..NUM_CLASSES * inputs).map(|_| T::lit(rng.gen_range(-scale..scale))).collect(),
            bias: [T::zero(); NUM_CLASSES],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T; NUM_CLASSES] {
        &self.bias
    }

    pub fn logits(&self, x: &[T]) -> Result<[T; NUM_CLASSES]> {
        if x.len() != self.inputs {
            return Err(Error::Shape(format!("head expects {} inputs, got {}", self.inputs, x.len())));
        }
        let mut out = self.bias;
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * self.inputs..(k + 1) * self.inputs];
            *o += row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>();
        }
        Ok(out)
    }
}

/// Probabilities over the ten concrete material classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialDistribution<T> {
    probs: [T; NUM_CLASSES],
}

impl<T: Real> MaterialDistribution<T> {
    pub fn from_logits(logits: &[T; NUM_CLASSES]) -> Self {
        let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut probs = logits.map(|z| (z - m).exp());
        let s: T = probs.iter().copied().sum();
        for p in &mut probs {
            *p /= s;
        }
        Self { probs }
    }

    pub fn from_probs(probs: [T; NUM_CLASSES]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidInput("probabilities must be finite and non-negative".into()));
        }
        let s: T = probs.iter().copied().sum();
        if (s - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidInput(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[T; NUM_CLASSES] {
        &self.probs
    }

    pub fn prob(&self, label: MaterialLabel) -> T {
        if label == MaterialLabel::Other {
            T::zero()
        } else {
            self.probs[label.id() as usize]
        }
    }

    /// Most probable class and its probability (ties go to the lower id).
    pub fn top(&self) -> (MaterialLabel, T) {
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if self.probs[k] > self.probs[best] {
                best = k;
            }
        }
        (MaterialLabel::CLASSES[best], self.probs[best])
    }

    /// The top class, or `Other` when it is not confident enough.
    pub fn decide(&self) -> MaterialLabel {
        let (label, p) = self.top();
        if p < T::lit(CONFIDENCE_FLOOR) {
            MaterialLabel::Other
        } else {
            label
        }
    }
}

/// Attention-weighted global average pooling of `features` under `weights`.
pub fn attention_pool<T: Real>(weights: &FeatureMap<T>, features: &FeatureMap<T>) -> Result<Vec<T>> {
    if weights.channels() != 1 || weights.height() != features.height() || weights.width() != features.width() {
        return Err(Error::Shape(format!(
            "attention {:?} does not cover features {:?}",
            weights.shape(),
            features.shape()
        )));
    }
    let total = weights.sum();
    let n = features.spatial_len();
    let mut pooled = Vec::with_capacity(features.channels());
    for c in 0..features.channels() {
        let chan = &features.data()[c * n..(c + 1) * n];
        let s: T = chan.iter().zip(weights.data()).map(|(&f, &a)| f * a).sum();
        // zero attention everywhere degrades to a plain average
        pooled.push(if total > T::zero() { s / total } else { chan.iter().copied().sum::<T>() / T::lit(n as f64) });
    }
    Ok(pooled)
}

/// Pools the finest fused features under the cascade prediction, scores them
/// and applies the confidence floor.
pub fn classify<T: Real>(
    prediction: &FeatureMap<T>,
    f_fuse: &FeatureMap<T>,
    head: &LinearHead<T>,
) -> Result<(MaterialLabel, MaterialDistribution<T>)> {
    let pooled = attention_pool(prediction, f_fuse)?;
    let dist = MaterialDistribution::from_logits(&head.logits(&pooled)?);
    Ok((dist.decide(), dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_confidence_goes_to_other() {
        let mut p = [0.55 / 9.0; NUM_CLASSES];
        p[3] = 0.45;
        let d = MaterialDistribution::from_probs(p).unwrap();
        assert_eq!(d.top().0, MaterialLabel::Glass);
        assert_eq!(d.decide(), MaterialLabel::Other);
    }

    #[test]
    fn confident_prediction() {
        let mut logits = [0.0f64; NUM_CLASSES];
        logits[9] = 10.0;
        let d = MaterialDistribution::from_logits(&logits);
        assert_eq!(d.decide(), MaterialLabel::Wood);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable() {
        let logits = [1000.0f64, 999.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = MaterialDistribution::from_logits(&logits);
        assert!(d.probs().iter().all(|p| p.is_finite()));
        assert_eq!(d.decide(), MaterialLabel::Cardboard);
    }

    #[test]
    fn pooling_weights_pixels() {
        let a = FeatureMap::new(1, 1, 2, vec![1.0, 3.0]).unwrap();
        let f = FeatureMap::new(2, 1, 2, vec![4.0, 8.0, 1.0, 1.0]).unwrap();
        assert_eq!(attention_pool(&a, &f).unwrap(), vec![7.0, 1.0]);
        let z = FeatureMap::zeros(1, 1, 2);
        assert_eq!(attention_pool(&z, &f).unwrap(), vec![6.0, 1.0]);
    }
}
