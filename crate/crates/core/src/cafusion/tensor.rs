use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major C x H x W tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!("feature map dims must be positive ({channels}x{height}x{width})")));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature map contains non-finite values".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, v: T) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "feature map dims must be positive");
        Self {
            channels,
            height,
            width,
            data: vec![v; channels * height * width],
        }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, T::zero())
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    /// Uniform values in `[lo, hi)`.
    pub fn random(rng: &mut impl Rng, channels: usize, height: usize, width: usize, lo: f64, hi: f64) -> Self {
        Self::from_fn(channels, height, width, |_, _, _| T::lit(rng.gen_range(lo..hi)))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn spatial_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn same_shape(&self, o: &Self) -> bool {
        self.shape() == o.shape()
    }

    pub fn ensure_same_shape(&self, o: &Self, what: &str) -> Result<()> {
        if self.same_shape(o) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: {:?} vs {:?}", self.shape(), o.shape())))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Elementwise combination of two same-shaped maps.
    pub fn zip_with(&self, o: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(o, "elementwise op")?;
        Ok(Self {
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect(),
            ..*self
        })
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.data.len() as f64)
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Nearest-neighbor resize of every channel.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        if height == self.height && width == self.width {
            return self.clone();
        }
        Self::from_fn(self.channels, height, width, |c, y, x| {
            self.get(c, y * self.height / height, x * self.width / width)
        })
    }

    /// Box-filter (area) downsampling; falls back to nearest when growing.
    pub fn resize_area(&self, height: usize, width: usize) -> Self {
        if height > self.height || width > self.width {
            return self.resize_nearest(height, width);
        }
        Self::from_fn(self.channels, height, width, |c, y, x| {
            let (y0, y1) = (y * self.height / height, ((y + 1) * self.height).div_ceil(height));
            let (x0, x1) = (x * self.width / width, ((x + 1) * self.width).div_ceil(width));
            let mut s = T::zero();
            for yy in y0..y1 {
                for xx in x0..x1 {
                    s += self.get(c, yy, xx);
                }
            }
            s / T::lit(((y1 - y0) * (x1 - x0)) as f64)
        })
    }

    pub fn cast<U: Real>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// f = I ⊙ F
pub fn modulate<T: Real>(input: &FeatureMap<T>, features: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    input.zip_with(features, |a, b| a * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn modulate_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = FeatureMap::<f64>::random(&mut rng, 2, 3, 4, -1.0, 1.0);
        assert_eq!(modulate(&x, &FeatureMap::filled(2, 3, 4, 1.0)).unwrap(), x);
        assert!(modulate(&x, &FeatureMap::zeros(2, 3, 4)).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(modulate(&x, &FeatureMap::zeros(2, 4, 3)).is_err());
    }

    #[test]
    fn modulate_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = FeatureMap::<f64>::random(&mut rng, 3, 5, 2, -2.0, 2.0);
        let b = FeatureMap::<f64>::random(&mut rng, 3, 5, 2, -2.0, 2.0);
        let m = modulate(&a, &b).unwrap();
        for c in 0..3 {
            for y in 0..5 {
                for x in 0..2 {
                    assert_eq!(m.get(c, y, x), a.get(c, y, x) * b.get(c, y, x));
                }
            }
        }
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(FeatureMap::<f64>::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(FeatureMap::<f64>::new(0, 2, 2, vec![]).is_err());
        assert!(FeatureMap::<f64>::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn resizing() {
        let m = FeatureMap::<f64>::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f64);
        let small = m.resize_area(2, 2);
        assert_eq!(small.data(), &[2.5, 4.5, 10.5, 12.5]);
        let up = small.resize_nearest(4, 4);
        assert_eq!(up.get(0, 3, 3), 12.5);
        assert_eq!(up.get(0, 1, 2), 4.5);
    }
}
