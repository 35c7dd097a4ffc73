use rand::Rng;

use crate::cafusion::conv::conv2d_3x3_backward;
use crate::cafusion::{conv2d_3x3, modulate, ConvFilter, FeatureMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Below this the overlap ratio is defined as zero.
pub const DENOM_EPS: f64 = 1e-12;

/// The three attention filters of one fusion level.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T> {
    pub rgb: ConvFilter<T>,
    pub depth: ConvFilter<T>,
    pub fuse: ConvFilter<T>,
}

impl<T: Real> FusionWeights<T> {
    pub fn zeros(channels: usize) -> Self {
        Self {
            rgb: ConvFilter::zeros(channels),
            depth: ConvFilter::zeros(channels),
            fuse: ConvFilter::zeros(channels),
        }
    }

    pub fn random(rng: &mut impl Rng, channels: usize, scale: f64) -> Self {
        Self {
            rgb: ConvFilter::random(rng, channels, scale),
            depth: ConvFilter::random(rng, channels, scale),
            fuse: ConvFilter::random(rng, channels, scale),
        }
    }

    pub fn channels(&self) -> usize {
        self.rgb.channels()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.rgb.channels();
        if self.depth.channels() != c || self.fuse.channels() != c {
            return Err(Error::Shape("fusion filters disagree on channel count".into()));
        }
        Ok(())
    }

    pub fn filters(&self) -> [&ConvFilter<T>; 3] {
        [&self.rgb, &self.depth, &self.fuse]
    }

    pub fn num_params(&self) -> usize {
        3 * self.rgb.num_params()
    }

    /// Flat parameter access in rgb, depth, fuse order.
    pub fn param(&self, i: usize) -> T {
        let n = self.rgb.num_params();
        self.filters()[i / n].param(i % n)
    }

    pub fn param_mut(&mut self, i: usize) -> &mut T {
        let n = self.rgb.num_params();
        match i / n {
            0 => self.rgb.param_mut(i % n),
            1 => self.depth.param_mut(i % n),
            _ => self.fuse.param_mut(i % n),
        }
    }

    pub fn descend(&mut self, grad: &FusionWeights<T>, lr: T) {
        self.rgb.descend(&grad.rgb, lr);
        self.depth.descend(&grad.depth, lr);
        self.fuse.descend(&grad.fuse, lr);
    }
}

/// Per-pixel attention maps of one level, each 1 x H x W.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSet<T> {
    pub alpha_rgb: FeatureMap<T>,
    pub alpha_depth: FeatureMap<T>,
    pub alpha_fuse: FeatureMap<T>,
    pub alpha: FeatureMap<T>,
}

/// `a_rgb + a_depth - a_fuse`, summed as `max + (min - a_fuse)`. The naive
/// order cancels when one sigmoid saturates at 1 and can push the ratio an
/// ulp above min(a_rgb, a_depth).
#[inline]
fn union_of<T: Real>(a_rgb: T, a_depth: T, a_fuse: T) -> T {
    let (lo, hi) = if a_rgb < a_depth { (a_rgb, a_depth) } else { (a_depth, a_rgb) };
    hi + (lo - a_fuse)
}

/// Overlap ratio of the fused response against the union of the two
/// single-modality responses.
#[inline]
pub fn overlap_ratio<T: Real>(a_rgb: T, a_depth: T, a_fuse: T) -> T {
    let d = union_of(a_rgb, a_depth, a_fuse);
    if d < T::lit(DENOM_EPS) {
        T::zero()
    } else {
        a_fuse / d
    }
}

/// The same ratio evaluated from the gate `s = a_fuse / (a_rgb a_depth)` as
/// `min * (max s / union)`. The quotient cannot round above 1, so the
/// result never exceeds min(a_rgb, a_depth) even by an ulp.
#[inline]
fn gated_ratio<T: Real>(a_rgb: T, a_depth: T, a_fuse: T, s: T) -> T {
    let (lo, hi) = if a_rgb < a_depth { (a_rgb, a_depth) } else { (a_depth, a_rgb) };
    let d = hi + (lo - a_fuse);
    if d < T::lit(DENOM_EPS) {
        T::zero()
    } else {
        lo * (hi * s / d)
    }
}

/// Forward pass of one fusion level: returns (f_fuse, attention maps).
pub fn fuse_level<T: Real>(
    f_rgb: &FeatureMap<T>,
    f_depth: &FeatureMap<T>,
    w: &FusionWeights<T>,
) -> Result<(FeatureMap<T>, AttentionSet<T>)> {
    f_rgb.ensure_same_shape(f_depth, "rgb and depth features")?;
    w.validate()?;
    let f_fuse = modulate(f_rgb, f_depth)?;
    let alpha_rgb = conv2d_3x3(f_rgb, &w.rgb)?.map(T::sigmoid);
    let alpha_depth = conv2d_3x3(f_depth, &w.depth)?.map(T::sigmoid);
    let gate = conv2d_3x3(&f_fuse, &w.fuse)?.map(T::sigmoid);
    let mut alpha_fuse = gate;
    let mut alpha = FeatureMap::zeros(1, f_rgb.height(), f_rgb.width());
    for i in 0..alpha.data().len() {
        let (ar, ad) = (alpha_rgb.data()[i], alpha_depth.data()[i]);
        let s = alpha_fuse.data()[i];
        let af = ar * ad * s;
        alpha_fuse.data_mut()[i] = af;
        alpha.data_mut()[i] = gated_ratio(ar, ad, af, s);
    }
    Ok((
        f_fuse,
        AttentionSet {
            alpha_rgb,
            alpha_depth,
            alpha_fuse,
            alpha,
        },
    ))
}

/// Upstream gradients flowing into one level.
#[derive(Debug, Clone)]
pub struct FuseUpstream<T> {
    /// dL/dα, 1 x H x W.
    pub d_alpha: FeatureMap<T>,
    /// dL/df_fuse, C x H x W, if the fused features feed later stages.
    pub d_fuse: Option<FeatureMap<T>>,
}

#[derive(Debug, Clone)]
pub struct FusionGrads<T> {
    pub d_rgb: FeatureMap<T>,
    pub d_depth: FeatureMap<T>,
    pub weights: FusionWeights<T>,
}

#[derive(Debug, Clone)]
struct ForwardCache<T> {
    f_rgb: FeatureMap<T>,
    f_depth: FeatureMap<T>,
    f_fuse: FeatureMap<T>,
    gate: FeatureMap<T>,
    att: AttentionSet<T>,
}

/// One fusion level that remembers its last forward pass for backprop.
#[derive(Debug, Clone)]
pub struct FusionModule<T> {
    pub weights: FusionWeights<T>,
    cache: Option<ForwardCache<T>>,
}

impl<T: Real> FusionModule<T> {
    pub fn new(weights: FusionWeights<T>) -> Self {
        Self { weights, cache: None }
    }

    pub fn forward(&mut self, f_rgb: &FeatureMap<T>, f_depth: &FeatureMap<T>) -> Result<(FeatureMap<T>, AttentionSet<T>)> {
        let (f_fuse, att) = fuse_level(f_rgb, f_depth, &self.weights)?;
        let gate = conv2d_3x3(&f_fuse, &self.weights.fuse)?.map(T::sigmoid);
        self.cache = Some(ForwardCache {
            f_rgb: f_rgb.clone(),
            f_depth: f_depth.clone(),
            f_fuse: f_fuse.clone(),
            gate,
            att: att.clone(),
        });
        Ok((f_fuse, att))
    }

    pub fn backward(&self, up: &FuseUpstream<T>) -> Result<FusionGrads<T>> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardState)?;
        let (ch, h, w) = cache.f_rgb.shape();
        if up.d_alpha.shape() != (1, h, w) {
            return Err(Error::Shape(format!("d_alpha must be 1x{h}x{w}, got {:?}", up.d_alpha.shape())));
        }
        if let Some(df) = &up.d_fuse {
            if df.shape() != (ch, h, w) {
                return Err(Error::Shape(format!("d_fuse must be {ch}x{h}x{w}, got {:?}", df.shape())));
            }
        }
        let att = &cache.att;
        let one = T::one();
        let mut g_zr = FeatureMap::zeros(1, h, w);
        let mut g_zd = FeatureMap::zeros(1, h, w);
        let mut g_zf = FeatureMap::zeros(1, h, w);
        for i in 0..h * w {
            let ar = att.alpha_rgb.data()[i];
            let ad = att.alpha_depth.data()[i];
            let af = att.alpha_fuse.data()[i];
            let s = cache.gate.data()[i];
            let d = union_of(ar, ad, af);
            if d < T::lit(DENOM_EPS) {
                continue;
            }
            let ga = up.d_alpha.data()[i];
            let d2 = d * d;
            let g_af = ga * (ar + ad) / d2;
            let g_ar = -ga * af / d2 + g_af * ad * s;
            let g_ad = -ga * af / d2 + g_af * ar * s;
            let g_s = g_af * ar * ad;
            g_zr.data_mut()[i] = g_ar * ar * (one - ar);
            g_zd.data_mut()[i] = g_ad * ad * (one - ad);
            g_zf.data_mut()[i] = g_s * s * (one - s);
        }
        let (d_rgb_direct, g_wr) = conv2d_3x3_backward(&cache.f_rgb, &self.weights.rgb, &g_zr);
        let (d_depth_direct, g_wd) = conv2d_3x3_backward(&cache.f_depth, &self.weights.depth, &g_zd);
        let (mut d_fuse, g_wf) = conv2d_3x3_backward(&cache.f_fuse, &self.weights.fuse, &g_zf);
        if let Some(df) = &up.d_fuse {
            d_fuse = d_fuse.zip_with(df, |a, b| a + b)?;
        }
        let d_rgb = d_rgb_direct.zip_with(&modulate(&d_fuse, &cache.f_depth)?, |a, b| a + b)?;
        let d_depth = d_depth_direct.zip_with(&modulate(&d_fuse, &cache.f_rgb)?, |a, b| a + b)?;
        Ok(FusionGrads {
            d_rgb,
            d_depth,
            weights: FusionWeights {
                rgb: g_wr,
                depth: g_wd,
                fuse: g_wf,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_yield_one_seventh() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = FeatureMap::<f64>::random(&mut rng, 3, 4, 5, -3.0, 3.0);
        let b = FeatureMap::<f64>::random(&mut rng, 3, 4, 5, -3.0, 3.0);
        let (_, att) = fuse_level(&a, &b, &FusionWeights::zeros(3)).unwrap();
        for &v in att.alpha.data() {
            assert!((v - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_sigmoid_stays_below_min() {
        // a_rgb and the gate both round to exactly 1.
        let mut w = FusionWeights::<f64>::zeros(1);
        w.rgb.bias = 60.0;
        w.fuse.bias = 60.0;
        for d in [0.212_960_250_873_366f64, 0.999_993_253_010_87, 2.3e-5, 1e-9] {
            let z = (d / (1.0 - d)).ln();
            w.depth.bias = z;
            let f = FeatureMap::filled(1, 2, 2, 0.5);
            let (_, att) = fuse_level(&f, &f, &w).unwrap();
            let ad = att.alpha_depth.data()[0];
            assert_eq!(att.alpha_rgb.data()[0], 1.0);
            assert!(att.alpha.data()[0] <= ad, "{} > {ad}", att.alpha.data()[0]);
        }
    }

    #[test]
    fn ratio_guard() {
        assert_eq!(overlap_ratio(0.0f64, 0.0, 0.0), 0.0);
        assert!((overlap_ratio(0.5f64, 0.5, 0.125) - 0.125 / 0.875).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_forward() {
        let m = FusionModule::new(FusionWeights::<f64>::zeros(2));
        let up = FuseUpstream {
            d_alpha: FeatureMap::zeros(1, 2, 2),
            d_fuse: None,
        };
        assert!(matches!(m.backward(&up), Err(Error::NoForwardState)));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = FeatureMap::<f64>::zeros(2, 3, 3);
        let b = FeatureMap::<f64>::zeros(2, 3, 4);
        assert!(fuse_level(&a, &b, &FusionWeights::zeros(2)).is_err());
        let c = FeatureMap::<f64>::zeros(2, 3, 3);
        assert!(fuse_level(&a, &c, &FusionWeights::zeros(3)).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = FusionWeights::<f64>::random(&mut rng, 2, 1.0);
        assert_eq!(w.num_params(), 3 * 19);
        *w.param_mut(19 + 18) = 7.0;
        assert_eq!(w.depth.bias, 7.0);
        assert_eq!(w.param(2 * 19), w.fuse.weights()[0]);
    }
}
