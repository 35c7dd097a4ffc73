use crate::cafusion::{fuse_level, AttentionSet, FeatureMap, FusionWeights};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of fusion levels in the cascade.
pub const NUM_LEVELS: usize = 5;

#[derive(Debug, Clone)]
pub struct CascadeOutput<T> {
    /// Combined attention at level-1 resolution, 1 x H1 x W1.
    pub prediction: FeatureMap<T>,
    /// (f_fuse, attention) per level, finest first.
    pub levels: Vec<(FeatureMap<T>, AttentionSet<T>)>,
}

/// Elementwise product of the per-level α maps, each resized (nearest) to
/// `height x width`.
pub fn combine_attention<T: Real>(alphas: &[&FeatureMap<T>], height: usize, width: usize) -> Result<FeatureMap<T>> {
    if alphas.is_empty() {
        return Err(Error::Shape("no attention maps to combine".into()));
    }
    let mut out = FeatureMap::filled(1, height, width, T::one());
    for a in alphas {
        if a.channels() != 1 {
            return Err(Error::Shape(format!("attention maps are single-channel, got {}", a.channels())));
        }
        let up = a.resize_nearest(height, width);
        out = out.zip_with(&up, |p, q| p * q)?;
    }
    Ok(out)
}

/// Runs all fusion levels on already-modulated (rgb, depth) feature pairs,
/// finest level first.
pub fn cascade<T: Real>(
    levels: &[(FeatureMap<T>, FeatureMap<T>)],
    weights: &[FusionWeights<T>],
) -> Result<CascadeOutput<T>> {
    if levels.len() != NUM_LEVELS {
        return Err(Error::Config(format!("cascade needs {NUM_LEVELS} levels, got {}", levels.len())));
    }
    if weights.len() != NUM_LEVELS {
        return Err(Error::Config(format!("cascade needs {NUM_LEVELS} weight sets, got {}", weights.len())));
    }
    let mut out = Vec::with_capacity(NUM_LEVELS);
    for (i, ((r, d), w)) in levels.iter().zip(weights).enumerate() {
        let lvl = fuse_level(r, d, w).map_err(|e| match e {
            Error::Shape(m) => Error::Shape(format!("level {}: {m}", i + 1)),
            other => other,
        })?;
        out.push(lvl);
    }
    let (h, w) = (levels[0].0.height(), levels[0].0.width());
    let alphas: Vec<&FeatureMap<T>> = out.iter().map(|(_, a)| &a.alpha).collect();
    let prediction = combine_attention(&alphas, h, w)?;
    Ok(CascadeOutput { prediction, levels: out })
}
