//! Run configuration, loadable from TOML. Every key is optional:
//!
//! ```toml
//! manifest = "seq/manifest.json"   # required by `run`
//! groundtruth = "seq/gt.jsonl"     # optional; enables metrics
//! output_dir = "out"
//! scales = [0.4, 0.2, 0.1, 0.05]   # meters, strictly decreasing
//! connectivity = 26                # 6, 18 or 26
//! stride = 4                       # pixel sampling step, 1..=64
//! min_depth = 0.3                  # meters
//! max_depth = 5.0                  # meters, at most 20
//! label_cutoff = 0.5               # meters, centroid to nearest box
//! palette = "palette.toml"         # optional; built-in otherwise
//! classifier = "passthrough"       # or "toy-cafn"
//! cafn_weights = "net.bin"         # optional, toy-cafn only
//! cafn_seed = 0                    # seeds weights and features when no file is given
//! keyframe_interval = 1            # process every n-th frame
//! incremental = false              # re-segment after every keyframe
//! match_iou = 0.5                  # detection match threshold, (0, 1]
//! color_threshold = 60.0           # optional RGB distance gate for linking cells
//! profile = false                  # include stage timings in metrics.json
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthSampling, Point3};
use crate::scalar::Real;
use crate::voxmap::{toml_line, Connectivity, MsccParams, Palette, ScaleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierMode {
    /// Materials come from the detections file.
    #[default]
    Passthrough,
    /// Materials come from the toy fusion network run on image crops.
    ToyCafn,
}

impl std::str::FromStr for ClassifierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passthrough" => Ok(Self::Passthrough),
            "toy-cafn" => Ok(Self::ToyCafn),
            _ => Err(Error::Config(format!("unknown classifier '{s}' (passthrough | toy-cafn)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub groundtruth: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub scales: Vec<f64>,
    pub connectivity: u32,
    pub stride: u32,
    pub min_depth: f64,
    pub max_depth: f64,
    pub label_cutoff: f64,
    pub palette: Option<PathBuf>,
    pub classifier: ClassifierMode,
    pub cafn_weights: Option<PathBuf>,
    pub cafn_seed: u64,
    pub keyframe_interval: usize,
    pub incremental: bool,
    pub match_iou: f64,
    pub color_threshold: Option<f64>,
    pub profile: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            groundtruth: None,
            output_dir: PathBuf::from("out"),
            scales: vec![0.4, 0.2, 0.1, 0.05],
            connectivity: 26,
            stride: 4,
            min_depth: 0.3,
            max_depth: 5.0,
            label_cutoff: 0.5,
            palette: None,
            classifier: ClassifierMode::Passthrough,
            cafn_weights: None,
            cafn_seed: 0,
            keyframe_interval: 1,
            incremental: false,
            match_iou: 0.5,
            color_threshold: None,
            profile: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(path, toml_line(text, &e), e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    /// Checks numeric ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        ScaleSet::new(self.scales.clone())?;
        Connectivity::from_count(self.connectivity)?;
        if !(1..=64).contains(&self.stride) {
            return bad(format!("stride {} outside 1..=64", self.stride));
        }
        if !(self.min_depth >= 0.0 && self.min_depth < self.max_depth && self.max_depth <= 20.0) {
            return bad(format!("depth range [{}, {}] invalid (need 0 <= min < max <= 20)", self.min_depth, self.max_depth));
        }
        if !(self.label_cutoff > 0.0 && self.label_cutoff <= 10.0) {
            return bad(format!("label_cutoff {} outside (0, 10]", self.label_cutoff));
        }
        if self.keyframe_interval == 0 {
            return bad("keyframe_interval must be at least 1".into());
        }
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return bad(format!("match_iou {} outside (0, 1]", self.match_iou));
        }
        if let Some(t) = self.color_threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("color_threshold {t} must be non-negative"));
            }
        }
        for (what, p) in [
            ("manifest", &self.manifest),
            ("groundtruth", &self.groundtruth),
            ("palette", &self.palette),
            ("cafn_weights", &self.cafn_weights),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return bad(format!("{what} file {} does not exist", p.display()));
                }
            }
        }
        if self.cafn_weights.is_some() && self.classifier != ClassifierMode::ToyCafn {
            log::warn!("cafn_weights given but classifier is passthrough; ignoring");
        }
        Ok(())
    }

    pub fn sampling<T: Real>(&self) -> DepthSampling<T> {
        DepthSampling {
            stride: self.stride,
            min_depth: T::lit(self.min_depth),
            max_depth: T::lit(self.max_depth),
        }
    }

    pub fn mscc_params<T: Real>(&self) -> Result<MsccParams<T>> {
        Ok(MsccParams {
            scales: ScaleSet::new(self.scales.iter().map(|&s| T::lit(s)).collect())?,
            connectivity: Connectivity::from_count(self.connectivity)?,
            origin: Point3::origin(),
            color_threshold: self.color_threshold.map(T::lit),
        })
    }

    pub fn load_palette(&self) -> Result<Palette> {
        match &self.palette {
            Some(p) => Palette::load(p),
            None => Ok(Palette::default()),
        }
    }
}
