//! End-to-end mapping of a recorded sequence: lift detections to 3D boxes,
//! accumulate the world cloud, segment, label, color and evaluate.

use std::fs;
use std::path::{Path, PathBuf};

use crate::cafusion::{crop_inputs, Cafn, SeededFeatures};
use crate::config::{ClassifierMode, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{empty_report, evaluate_map, MetricsReport, StageTimer, StageTimings};
use crate::geometry::{depth_to_cloud_colored, DepthImage, PlyData, PointCloud, RgbImage};
use crate::scalar::Real;
use crate::sequence::{load_groundtruth, load_manifest, write_boxes, Detection2D, GroundTruthMap, Sequence};
use crate::voxmap::{
    box_to_voxel, colorize, lift_detection, mscc_segment, propagate_labels, voxelize, BBox3D, MaterialLabel, MsccParams,
    Palette, SemanticMap, VoxelKey,
};

/// Side of the square crops fed to the toy classifier.
pub const CAFN_BASE: usize = 16;
const CAFN_CHANNELS: usize = 3;

enum Classifier<T> {
    Passthrough,
    Toy(Box<Cafn<T>>, SeededFeatures),
}

impl<T: Real> Classifier<T> {
    fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.classifier {
            ClassifierMode::Passthrough => Classifier::Passthrough,
            ClassifierMode::ToyCafn => {
                let net = match &cfg.cafn_weights {
                    Some(p) => Cafn::load(p, CAFN_BASE)?,
                    None => Cafn::seeded(cfg.cafn_seed, CAFN_CHANNELS, CAFN_BASE),
                };
                if net.channels != CAFN_CHANNELS {
                    return Err(Error::Config(format!("toy network must take {CAFN_CHANNELS} channels")));
                }
                Classifier::Toy(Box::new(net), SeededFeatures { seed: cfg.cafn_seed })
            }
        })
    }

    fn material(&self, det: &Detection2D<T>, rgb: &RgbImage, depth: &DepthImage, max_depth: T) -> Result<MaterialLabel> {
        match self {
            Classifier::Passthrough => Ok(det.material.unwrap_or_else(|| {
                log::warn!("frame {}: detection '{}' has no material; using other", det.frame_id, det.object_label);
                MaterialLabel::Other
            })),
            Classifier::Toy(net, features) => {
                let (r, d) = crop_inputs(Some(rgb), depth, &det.bbox, max_depth)?;
                Ok(net.forward(&r, &d, features)?.label)
            }
        }
    }
}

/// Result of segmenting one cloud.
#[derive(Debug, Clone)]
pub struct SegmentOutput<T> {
    pub map: SemanticMap<T>,
    /// Majority cell of each box at the finest scale, when it has support.
    pub associations: Vec<Option<VoxelKey>>,
}

/// Voxelize, associate boxes, run multi-scale clustering, propagate labels
/// and color the map.
pub fn segment_cloud<T: Real>(
    cloud: &PointCloud<T>,
    boxes: &[BBox3D<T>],
    params: &MsccParams<T>,
    cutoff: T,
    palette: &Palette,
) -> Result<SegmentOutput<T>> {
    if cloud.is_empty() {
        return Ok(SegmentOutput {
            map: SemanticMap::empty(),
            associations: vec![None; boxes.len()],
        });
    }
    let grid = voxelize(cloud, params.scales.finest(), params.origin)?;
    let associations = boxes
        .iter()
        .map(|b| match box_to_voxel(&grid, cloud, b) {
            Ok(k) => Ok(Some(k)),
            Err(Error::NoSupport { box_id }) => {
                log::debug!("box {box_id} has no cloud support");
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let seg = mscc_segment(cloud, params, boxes)?;
    let map = propagate_labels(&seg, cloud, boxes, cutoff, palette)?;
    Ok(SegmentOutput {
        map: colorize(&map, palette),
        associations,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub map: SemanticMap<T>,
    pub boxes: Vec<BBox3D<T>>,
    pub cloud_points: usize,
    pub keyframes: usize,
    pub metrics: MetricsReport,
    pub timings: StageTimings,
}

/// Runs the mapping loop over an in-memory sequence. Nothing is written.
pub fn process_sequence<T: Real>(
    seq: &Sequence<T>,
    cfg: &RunConfig,
    palette: &Palette,
    gt: Option<&GroundTruthMap<T>>,
) -> Result<RunOutput<T>> {
    let mut timer = StageTimer::new();
    let classifier = Classifier::<T>::from_config(cfg).map_err(|e| e.in_stage("classify"))?;
    let sampling = cfg.sampling::<T>();
    let params = cfg.mscc_params::<T>()?;
    let cutoff = T::lit(cfg.label_cutoff);
    let intr = &seq.intrinsics;

    let mut cloud = PointCloud::empty();
    let mut boxes: Vec<BBox3D<T>> = Vec::new();
    let mut keyframes = 0;
    let mut map = SemanticMap::empty();
    for (k, frame) in seq.frames.iter().enumerate() {
        if k % cfg.keyframe_interval != 0 {
            continue;
        }
        keyframes += 1;
        let (depth, rgb) = timer
            .time("ingest", || -> Result<_> {
                let depth = DepthImage::read_pgm(&seq.resolve(&frame.depth_path))?;
                let rgb = RgbImage::read_ppm(&seq.resolve(&frame.rgb_path))?;
                for (what, w, h) in [("depth", depth.width(), depth.height()), ("rgb", rgb.width(), rgb.height())] {
                    if (w, h) != (intr.width, intr.height) {
                        return Err(Error::InvalidInput(format!(
                            "frame {}: {what} image is {w}x{h}, intrinsics say {}x{}",
                            frame.frame_id, intr.width, intr.height
                        )));
                    }
                }
                Ok((depth, rgb))
            })
            .map_err(|e| e.in_stage("ingest"))?;

        let dets = seq.detections.get(&frame.frame_id).map(Vec::as_slice).unwrap_or(&[]);
        let materials = timer
            .time("classify", || {
                dets.iter()
                    .map(|d| classifier.material(d, &rgb, &depth, sampling.max_depth))
                    .collect::<Result<Vec<_>>>()
            })
            .map_err(|e| e.in_stage("classify"))?;

        timer.time("lift", || {
            for (d, &m) in dets.iter().zip(&materials) {
                let id = boxes.len() as u32;
                match lift_detection(d, m, &depth, intr, &frame.pose, &sampling, id) {
                    Some(b) => boxes.push(b),
                    None => log::debug!("frame {}: '{}' has no valid depth", frame.frame_id, d.object_label),
                }
            }
        });

        let frame_cloud = timer
            .time("cloud", || depth_to_cloud_colored(&depth, Some(&rgb), intr, &frame.pose, &sampling))
            .map_err(|e| e.in_stage("cloud"))?;
        cloud.extend(frame_cloud);

        if cfg.incremental {
            map = timer
                .time("voxm", || segment_cloud(&cloud, &boxes, &params, cutoff, palette))
                .map_err(|e| e.in_stage("voxm"))?
                .map;
        }
    }
    if !cfg.incremental || keyframes == 0 {
        map = timer
            .time("voxm", || segment_cloud(&cloud, &boxes, &params, cutoff, palette))
            .map_err(|e| e.in_stage("voxm"))?
            .map;
    }
    map.check_invariants(palette).map_err(|e| e.in_stage("voxm"))?;

    let metrics = timer
        .time("eval", || match gt {
            Some(gt) if !map.is_empty() => evaluate_map(&map, gt, cfg.match_iou, params.scales.finest() * T::lit(0.5)),
            Some(gt) => Ok(empty_report(gt.mode())),
            None => Ok(no_gt_report(&map, &boxes)),
        })
        .map_err(|e| e.in_stage("eval"))?;
    let timings = timer.finish();
    let metrics = if cfg.profile { metrics.with_timings(&timings) } else { metrics };
    Ok(RunOutput {
        map,
        boxes,
        cloud_points: cloud.len(),
        keyframes,
        metrics,
        timings,
    })
}

fn no_gt_report<T: Real>(map: &SemanticMap<T>, boxes: &[BBox3D<T>]) -> MetricsReport {
    let mut r = empty_report("none");
    r.n_points = map.len();
    r.n_clusters = map.num_clusters();
    r.n_detections = boxes.len();
    r
}

/// Files produced by [`run`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub map: PathBuf,
    pub boxes: PathBuf,
    pub metrics: PathBuf,
    pub timings: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            map: dir.join("map.ply"),
            boxes: dir.join("boxes.jsonl"),
            metrics: dir.join("metrics.json"),
            timings: dir.join("timings.json"),
        }
    }
}

/// Loads everything named by `cfg`, runs the pipeline and only then writes
/// the map, boxes, metrics and timings into the output directory.
pub fn run<T: Real>(cfg: &RunConfig) -> Result<(RunOutput<T>, RunFiles)> {
    cfg.validate()?;
    let manifest = cfg
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Config("no manifest given".into()))?;
    let seq = load_manifest::<T>(manifest)?;
    let palette = cfg.load_palette()?;
    let gt = cfg.groundtruth.as_deref().map(load_groundtruth::<T>).transpose()?;
    let out = process_sequence(&seq, cfg, &palette, gt.as_ref())?;

    let files = RunFiles::in_dir(&cfg.output_dir);
    let ply = PlyData::from_map(&out.map).to_bytes();
    let timings = serde_json::to_string_pretty(&out.timings.to_json()).expect("serializable") + "\n";
    let write = |p: &Path, bytes: &[u8]| fs::write(p, bytes).map_err(|e| Error::io(p, e));
    (|| {
        fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
        write(&files.map, &ply)?;
        write_boxes(&out.boxes, &files.boxes)?;
        write(&files.metrics, out.metrics.to_json().as_bytes())?;
        write(&files.timings, timings.as_bytes())
    })()
    .map_err(|e| e.in_stage("export"))?;
    Ok((out, files))
}
