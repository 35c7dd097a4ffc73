//! Gradient descent on synthetic two-class blobs, for demonstrating that
//! the analytic gradients reduce a loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cafusion::{FeatureMap, FuseUpstream, FusionModule, FusionWeights};
use crate::error::{Error, Result};

pub const MAX_STEPS: usize = 200;

const SIZE: usize = 6;
/// Mean-α targets for aligned and misaligned blobs.
const TARGETS: [f64; 2] = [0.4, 0.05];

fn blob(cy: f64, cx: f64) -> FeatureMap<f64> {
    FeatureMap::from_fn(1, SIZE, SIZE, |_, y, x| {
        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
        2.0 * (-d2 / 2.0).exp() - 0.5
    })
}

/// Class 0 puts both modality blobs at the same spot; class 1 separates them.
fn sample(rng: &mut impl Rng, class: usize) -> (FeatureMap<f64>, FeatureMap<f64>) {
    let (y, x) = (rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0));
    let rgb = blob(y, x);
    let depth = if class == 0 {
        blob(y, x)
    } else {
        blob(SIZE as f64 - 1.0 - y, SIZE as f64 - 1.0 - x)
    };
    (rgb, depth)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean squared error of mean α against the class target, per step.
    pub losses: Vec<f64>,
    pub weights: FusionWeights<f64>,
}

pub fn train_toy(seed: u64, steps: usize, lr: f64) -> Result<TrainReport> {
    if steps == 0 || steps > MAX_STEPS {
        return Err(Error::Config(format!("toy training takes 1..={MAX_STEPS} steps, got {steps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<_> = (0..16).map(|i| (sample(&mut rng, i % 2), i % 2)).collect();
    let mut module = FusionModule::new(FusionWeights::random(&mut rng, 1, 0.1));
    let n = (SIZE * SIZE) as f64;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut grad = FusionWeights::zeros(1);
        let mut loss = 0.0;
        for ((rgb, depth), class) in &data {
            let (_, att) = module.forward(rgb, depth)?;
            let err = att.alpha.mean() - TARGETS[*class];
            loss += err * err;
            let g = 2.0 * err / (n * data.len() as f64);
            let grads = module.backward(&FuseUpstream {
                d_alpha: FeatureMap::filled(1, SIZE, SIZE, g),
                d_fuse: None,
            })?;
            grad.descend(&grads.weights, -1.0);
        }
        losses.push(loss / data.len() as f64);
        module.weights.descend(&grad, lr);
    }
    Ok(TrainReport {
        losses,
        weights: module.weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_goes_down() {
        let r = train_toy(7, 200, 20.0).unwrap();
        let (first, last) = (r.losses[0], *r.losses.last().unwrap());
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert!(train_toy(7, 201, 1.0).is_err());
    }
}
