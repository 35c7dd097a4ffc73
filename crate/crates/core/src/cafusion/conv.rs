use rand::Rng;

use crate::cafusion::FeatureMap;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A bank of 3x3 kernels mapping C channels to one output channel, plus bias.
/// Weights are indexed `[c][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilter<T> {
    channels: usize,
    weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> ConvFilter<T> {
    pub fn new(channels: usize, weights: Vec<T>, bias: T) -> Result<Self> {
        if channels == 0 || weights.len() != channels * 9 {
            return Err(Error::Shape(format!(
                "3x3 filter over {channels} channels needs {} weights, got {}",
                channels * 9,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::InvalidInput("filter contains non-finite values".into()));
        }
        Ok(Self {
            channels,
            weights,
            bias,
        })
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            weights: vec![T::zero(); channels * 9],
            bias: T::zero(),
        }
    }

    pub fn random(rng: &mut impl Rng, channels: usize, scale: f64) -> Self {
        Self {
            channels,
            weights: (0..channels * 9).map(|_| T::lit(rng.gen_range(-scale..scale))).collect(),
            bias: T::lit(rng.gen_range(-scale..scale)),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    #[inline]
    pub fn weight(&self, c: usize, ky: usize, kx: usize) -> T {
        self.weights[c * 9 + ky * 3 + kx]
    }

    /// Number of scalar parameters (weights plus bias).
    pub fn num_params(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn param(&self, i: usize) -> T {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut T {
        if i < self.weights.len() {
            &mut self.weights[i]
        } else {
            &mut self.bias
        }
    }

    /// `self -= lr * grad`
    pub fn descend(&mut self, grad: &ConvFilter<T>, lr: T) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * *g;
        }
        self.bias -= lr * grad.bias;
    }
}

/// Stride 1, zero padding 1: output is 1 x H x W.
pub fn conv2d_3x3<T: Real>(input: &FeatureMap<T>, filter: &ConvFilter<T>) -> Result<FeatureMap<T>> {
    if input.channels() != filter.channels() {
        return Err(Error::Shape(format!(
            "filter expects {} channels, input has {}",
            filter.channels(),
            input.channels()
        )));
    }
    let (ch, h, w) = input.shape();
    Ok(FeatureMap::from_fn(1, h, w, |_, y, x| {
        let mut acc = filter.bias;
        for c in 0..ch {
            for ky in 0..3 {
                let yy = y as isize + ky as isize - 1;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let xx = x as isize + kx as isize - 1;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    acc += filter.weight(c, ky, kx) * input.get(c, yy as usize, xx as usize);
                }
            }
        }
        acc
    }))
}

/// Gradients of a [`conv2d_3x3`] output: returns (d input, d filter).
pub(crate) fn conv2d_3x3_backward<T: Real>(
    input: &FeatureMap<T>,
    filter: &ConvFilter<T>,
    d_out: &FeatureMap<T>,
) -> (FeatureMap<T>, ConvFilter<T>) {
    let (ch, h, w) = input.shape();
    let mut d_in = FeatureMap::zeros(ch, h, w);
    let mut d_filter = ConvFilter::zeros(ch);
    for y in 0..h {
        for x in 0..w {
            let g = d_out.get(0, y, x);
            if g == T::zero() {
                continue;
            }
            d_filter.bias += g;
            for c in 0..ch {
                for ky in 0..3 {
                    let yy = y as isize + ky as isize - 1;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let xx = x as isize + kx as isize - 1;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        let (yy, xx) = (yy as usize, xx as usize);
                        d_filter.weights[c * 9 + ky * 3 + kx] += g * input.get(c, yy, xx);
                        let i = d_in.index(c, yy, xx);
                        d_in.data_mut()[i] += g * filter.weight(c, ky, kx);
                    }
                }
            }
        }
    }
    (d_in, d_filter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = FeatureMap::<f64>::random(&mut rng, 2, 4, 4, -1.0, 1.0);
        let mut f = ConvFilter::zeros(2);
        f.bias = 0.25;
        assert!(conv2d_3x3(&x, &f).unwrap().data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn degenerate_single_pixel() {
        let x = FeatureMap::new(1, 1, 1, vec![3.0]).unwrap();
        let mut w = vec![0.0; 9];
        w[4] = 2.0;
        w[0] = 100.0; // falls in the padding
        let f = ConvFilter::new(1, w, 0.5).unwrap();
        assert_eq!(conv2d_3x3(&x, &f).unwrap().data(), &[6.5]);
    }

    #[test]
    fn channel_mismatch() {
        let x = FeatureMap::<f64>::zeros(3, 2, 2);
        assert!(matches!(conv2d_3x3(&x, &ConvFilter::zeros(2)), Err(Error::Shape(_))));
        assert!(ConvFilter::<f64>::new(2, vec![0.0; 9], 0.0).is_err());
    }
}
