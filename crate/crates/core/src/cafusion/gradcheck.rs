use crate::cafusion::{fuse_level, FeatureMap, FuseUpstream, FusionModule, FusionWeights};
use crate::error::Result;
use crate::scalar::Real;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Which entry produced `max_rel_error`.
    pub worst: String,
}

impl GradCheckReport {
    fn record(&mut self, name: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let rel = relative_error(analytic, numeric);
        self.max_abs_error = self.max_abs_error.max((analytic - numeric).abs());
        if rel > self.max_rel_error || self.checked == 1 {
            self.max_rel_error = rel;
            self.worst = name();
        }
    }
}

/// Scalar probe loss `sum(g_alpha * α) + sum(g_fuse * f_fuse)`.
fn probe_loss<T: Real>(
    f_rgb: &FeatureMap<T>,
    f_depth: &FeatureMap<T>,
    w: &FusionWeights<T>,
    g_alpha: &FeatureMap<T>,
    g_fuse: &FeatureMap<T>,
) -> Result<f64> {
    let (fused, att) = fuse_level(f_rgb, f_depth, w)?;
    let a: f64 = att.alpha.data().iter().zip(g_alpha.data()).map(|(x, g)| x.as_f64() * g.as_f64()).sum();
    let b: f64 = fused.data().iter().zip(g_fuse.data()).map(|(x, g)| x.as_f64() * g.as_f64()).sum();
    Ok(a + b)
}

/// Compares the analytic backward pass of one fusion level with central
/// differences of step `h` over every input entry and every weight.
pub fn check_fuse_level<T: Real>(
    f_rgb: &FeatureMap<T>,
    f_depth: &FeatureMap<T>,
    weights: &FusionWeights<T>,
    g_alpha: &FeatureMap<T>,
    g_fuse: &FeatureMap<T>,
    h: f64,
) -> Result<GradCheckReport> {
    let mut module = FusionModule::new(weights.clone());
    module.forward(f_rgb, f_depth)?;
    let grads = module.backward(&FuseUpstream {
        d_alpha: g_alpha.clone(),
        d_fuse: Some(g_fuse.clone()),
    })?;
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: String::new(),
    };
    let step = T::lit(h);
    let two_h = 2.0 * h;

    for (which, input, analytic) in [("f_rgb", f_rgb, &grads.d_rgb), ("f_depth", f_depth, &grads.d_depth)] {
        for i in 0..input.data().len() {
            let mut plus = input.clone();
            plus.data_mut()[i] += step;
            let mut minus = input.clone();
            minus.data_mut()[i] -= step;
            let (lp, lm) = if which == "f_rgb" {
                (
                    probe_loss(&plus, f_depth, weights, g_alpha, g_fuse)?,
                    probe_loss(&minus, f_depth, weights, g_alpha, g_fuse)?,
                )
            } else {
                (
                    probe_loss(f_rgb, &plus, weights, g_alpha, g_fuse)?,
                    probe_loss(f_rgb, &minus, weights, g_alpha, g_fuse)?,
                )
            };
            report.record(|| format!("{which}[{i}]"), analytic.data()[i].as_f64(), (lp - lm) / two_h);
        }
    }

    for i in 0..weights.num_params() {
        let mut plus = weights.clone();
        *plus.param_mut(i) += step;
        let mut minus = weights.clone();
        *minus.param_mut(i) -= step;
        let lp = probe_loss(f_rgb, f_depth, &plus, g_alpha, g_fuse)?;
        let lm = probe_loss(f_rgb, f_depth, &minus, g_alpha, g_fuse)?;
        report.record(|| format!("weight[{i}]"), grads.weights.param(i).as_f64(), (lp - lm) / two_h);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_case_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = FeatureMap::<f64>::random(&mut rng, 1, 4, 4, -1.0, 1.0);
        let b = FeatureMap::<f64>::random(&mut rng, 1, 4, 4, -1.0, 1.0);
        let w = FusionWeights::random(&mut rng, 1, 0.5);
        let ga = FeatureMap::random(&mut rng, 1, 4, 4, -1.0, 1.0);
        let gf = FeatureMap::random(&mut rng, 1, 4, 4, -1.0, 1.0);
        let r = check_fuse_level(&a, &b, &w, &ga, &gf, 1e-5).unwrap();
        assert_eq!(r.checked, 32 + 30);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
