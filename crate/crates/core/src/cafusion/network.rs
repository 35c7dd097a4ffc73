//! A toy five-level fusion network that classifies image crops.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cafusion::tensor_io::{
    fusion_weights_from_tensors, fusion_weights_to_tensors, read_tensors, write_tensors, Tensor,
};
use crate::cafusion::{
    cascade, classify, modulate, CascadeOutput, FeatureMap, FusionWeights, LinearHead, MaterialDistribution,
    NUM_CLASSES, NUM_LEVELS,
};
use crate::error::{Error, Result};
use crate::geometry::{DepthImage, RgbImage};
use crate::scalar::Real;
use crate::sequence::BBox2D;
use crate::voxmap::MaterialLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Rgb,
    Depth,
}

/// Source of the per-level backbone features F^i.
pub trait FeatureProvider<T> {
    fn features(&self, level: usize, modality: Modality, shape: (usize, usize, usize)) -> Result<FeatureMap<T>>;
}

/// Deterministic pseudo-random features in `[0.5, 1.5)`, a function of
/// (seed, level, modality) only.
#[derive(Debug, Clone, Copy)]
pub struct SeededFeatures {
    pub seed: u64,
}

impl<T: Real> FeatureProvider<T> for SeededFeatures {
    fn features(&self, level: usize, modality: Modality, (c, h, w): (usize, usize, usize)) -> Result<FeatureMap<T>> {
        let tag = level as u64 * 2 + u64::from(modality == Modality::Depth);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag);
        Ok(FeatureMap::random(&mut rng, c, h, w, 0.5, 1.5))
    }
}

/// Features read from a tensor file: rgb then depth for each level, finest
/// first (ten rank-3 tensors).
#[derive(Debug, Clone)]
pub struct FileFeatures<T> {
    maps: Vec<[FeatureMap<T>; 2]>,
}

impl<T: Real> FileFeatures<T> {
    pub fn from_tensors(t: &[Tensor]) -> Result<Self> {
        if t.len() != 2 * NUM_LEVELS {
            return Err(Error::Shape(format!("feature file needs {} tensors, got {}", 2 * NUM_LEVELS, t.len())));
        }
        let maps = t
            .chunks(2)
            .map(|p| Ok([p[0].to_feature_map()?, p[1].to_feature_map()?]))
            .collect::<Result<_>>()?;
        Ok(Self { maps })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensors(&read_tensors(path)?)
    }
}

impl<T: Real> FeatureProvider<T> for FileFeatures<T> {
    fn features(&self, level: usize, modality: Modality, shape: (usize, usize, usize)) -> Result<FeatureMap<T>> {
        let f = &self.maps[level][usize::from(modality == Modality::Depth)];
        if f.shape() != shape {
            return Err(Error::Shape(format!("level {} features are {:?}, need {shape:?}", level + 1, f.shape())));
        }
        Ok(f.clone())
    }
}

#[derive(Debug, Clone)]
pub struct CafnOutput<T> {
    pub cascade: CascadeOutput<T>,
    pub label: MaterialLabel,
    pub distribution: MaterialDistribution<T>,
}

/// Five fusion levels over square maps of side `base, base/2, ...` plus a
/// linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Cafn<T> {
    pub channels: usize,
    pub base: usize,
    pub levels: Vec<FusionWeights<T>>,
    pub head: LinearHead<T>,
}

impl<T: Real> Cafn<T> {
    pub fn seeded(seed: u64, channels: usize, base: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = (0..NUM_LEVELS).map(|_| FusionWeights::random(&mut rng, channels, 0.5)).collect();
        let head = LinearHead::random(&mut rng, channels, 4.0);
        Self {
            channels,
            base,
            levels,
            head,
        }
    }

    pub fn level_size(&self, level: usize) -> usize {
        (self.base >> level).max(1)
    }

    /// Runs the cascade on a (rgb, depth) input pair with `channels` channels.
    pub fn forward(
        &self,
        rgb: &FeatureMap<T>,
        depth: &FeatureMap<T>,
        provider: &dyn FeatureProvider<T>,
    ) -> Result<CafnOutput<T>> {
        if rgb.channels() != self.channels || depth.channels() != self.channels {
            return Err(Error::Shape(format!("network expects {} input channels", self.channels)));
        }
        let s0 = self.level_size(0);
        let mut input = [rgb.resize_area(s0, s0), depth.resize_area(s0, s0)];
        let mut pairs = Vec::with_capacity(NUM_LEVELS);
        for level in 0..NUM_LEVELS {
            let s = self.level_size(level);
            let shape = (self.channels, s, s);
            let fr = modulate(&input[0], &provider.features(level, Modality::Rgb, shape)?)?;
            let fd = modulate(&input[1], &provider.features(level, Modality::Depth, shape)?)?;
            if level + 1 < NUM_LEVELS {
                let n = self.level_size(level + 1);
                input = [fr.resize_area(n, n), fd.resize_area(n, n)];
            }
            pairs.push((fr, fd));
        }
        let out = cascade(&pairs, &self.levels)?;
        let (label, distribution) = classify(&out.prediction, &out.levels[0].0, &self.head)?;
        Ok(CafnOutput {
            cascade: out,
            label,
            distribution,
        })
    }

    /// 5 x 6 fusion tensors, then head weights `[10, C]` and bias `[10]`.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = self.levels.iter().flat_map(fusion_weights_to_tensors).collect();
        out.push(Tensor {
            dims: vec![NUM_CLASSES as u32, self.channels as u32],
            data: self.head.weights().iter().map(|v| v.as_f64() as f32).collect(),
        });
        out.push(Tensor {
            dims: vec![NUM_CLASSES as u32],
            data: self.head.bias().iter().map(|v| v.as_f64() as f32).collect(),
        });
        out
    }

    pub fn from_tensors(t: &[Tensor], base: usize) -> Result<Self> {
        if t.len() != 6 * NUM_LEVELS + 2 {
            return Err(Error::Shape(format!("network file needs {} tensors, got {}", 6 * NUM_LEVELS + 2, t.len())));
        }
        let levels = t[..6 * NUM_LEVELS]
            .chunks(6)
            .map(fusion_weights_from_tensors)
            .collect::<Result<Vec<FusionWeights<T>>>>()?;
        let channels = levels[0].channels();
        if levels.iter().any(|l| l.channels() != channels) {
            return Err(Error::Shape("all levels must share a channel count".into()));
        }
        let (hw, hb) = (&t[6 * NUM_LEVELS], &t[6 * NUM_LEVELS + 1]);
        if hw.dims != [NUM_CLASSES as u32, channels as u32] || hb.dims != [NUM_CLASSES as u32] {
            return Err(Error::Shape(format!("bad head tensors {:?} / {:?}", hw.dims, hb.dims)));
        }
        let lift = |v: &f32| T::lit(f64::from(*v));
        let mut bias = [T::zero(); NUM_CLASSES];
        for (b, v) in bias.iter_mut().zip(&hb.data) {
            *b = lift(v);
        }
        let head = LinearHead::new(channels, hw.data.iter().map(lift).collect(), bias)?;
        Ok(Self {
            channels,
            base,
            levels,
            head,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_tensors(path, &self.to_tensors())
    }

    pub fn load(path: &Path, base: usize) -> Result<Self> {
        Self::from_tensors(&read_tensors(path)?, base)
    }
}

/// Three-channel crops of a detection: normalized RGB, and depth as
/// (normalized depth, validity, squared normalized depth). Missing color is
/// mid-gray.
pub fn crop_inputs<T: Real>(
    rgb: Option<&RgbImage>,
    depth: &DepthImage,
    bbox: &BBox2D<T>,
    max_depth: T,
) -> Result<(FeatureMap<T>, FeatureMap<T>)> {
    let b = bbox.clamp(depth.width(), depth.height());
    let px = |v: T| v.to_usize().unwrap_or(0);
    let (u0, v0) = (px(b.x.floor()), px(b.y.floor()));
    let (u1, v1) = (px((b.x + b.w).ceil()), px((b.y + b.h).ceil()));
    if u1 <= u0 || v1 <= v0 {
        return Err(Error::InvalidInput("detection crop is empty".into()));
    }
    let (w, h) = (u1 - u0, v1 - v0);
    let inv255 = T::lit(1.0 / 255.0);
    let rgb_map = FeatureMap::from_fn(3, h, w, |c, y, x| match rgb {
        Some(img) => T::lit(f64::from(img.get((u0 + x) as u32, (v0 + y) as u32)[c])) * inv255,
        None => T::lit(0.5),
    });
    let depth_map = FeatureMap::from_fn(3, h, w, |c, y, x| {
        let raw = depth.get((u0 + x) as u32, (v0 + y) as u32);
        let d = (T::lit(f64::from(raw)) * T::lit(1e-3) / max_depth).min(T::one());
        match c {
            0 => d,
            1 => T::lit(f64::from(u8::from(raw > 0))),
            _ => d * d,
        }
    });
    Ok((rgb_map, depth_map))
}

/// Random (rgb, depth) pair for demos: `channels x size x size` in [0, 1).
pub fn random_inputs<T: Real>(rng: &mut impl Rng, channels: usize, size: usize) -> (FeatureMap<T>, FeatureMap<T>) {
    (
        FeatureMap::random(rng, channels, size, size, 0.0, 1.0),
        FeatureMap::random(rng, channels, size, size, 0.0, 1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_deterministic() {
        let net = Cafn::<f64>::seeded(1, 3, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (r, d) = random_inputs(&mut rng, 3, 20);
        let p = SeededFeatures { seed: 3 };
        let a = net.forward(&r, &d, &p).unwrap();
        let b = net.forward(&r, &d, &p).unwrap();
        assert_eq!(a.label, b.label);
        assert_eq!(a.distribution, b.distribution);
        assert_eq!(a.cascade.prediction.shape(), (1, 16, 16));
        assert_eq!(a.cascade.levels[4].0.shape(), (3, 1, 1));
    }

    #[test]
    fn tensor_round_trip() {
        let net = Cafn::<f32>::seeded(5, 2, 8);
        let back = Cafn::<f32>::from_tensors(&net.to_tensors(), 8).unwrap();
        assert_eq!(back, net);
        assert!(Cafn::<f32>::from_tensors(&net.to_tensors()[1..], 8).is_err());
    }

    #[test]
    fn crops() {
        let mut depth = DepthImage::zeros(10, 10);
        depth.set(2, 3, 2500);
        let b = BBox2D {
            x: 2.0,
            y: 3.0,
            w: 2.0,
            h: 2.0,
        };
        let (r, d) = crop_inputs::<f64>(None, &depth, &b, 5.0).unwrap();
        assert_eq!(r.shape(), (3, 2, 2));
        assert_eq!(d.get(0, 0, 0), 0.5);
        assert_eq!(d.get(1, 0, 0), 1.0);
        assert_eq!(d.get(1, 1, 1), 0.0);
    }
}
