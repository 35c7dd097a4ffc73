//! Synthetic recordings built by ray-casting axis-aligned objects.
//!
//! The conference-room scene puts the 25 objects of a small meeting room in
//! one row along world x (z up), separated by gaps wider than twice the
//! coarsest default voxel, and sweeps a camera past them looking along +y
//! and slightly down. Detections are the tight pixel boxes of each object's
//! visible pixels; ground truth is each object's box grown by 2 cm.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Point3, Pose, RgbImage};
use crate::sequence::{BBox2D, Detection2D, DetectionMap, FrameRecord, GroundTruthMap, Sequence};
use crate::voxmap::{BBox3D, MaterialLabel, Palette};

/// Object kind, material as surveyed, and how many there are.
pub struct InventoryEntry {
    pub object: &'static str,
    pub material: &'static str,
    pub count: usize,
    /// Width (x), depth (y), height (z) in meters, and height of the base.
    pub size: [f64; 3],
    pub base: f64,
}

pub const CONFERENCE_ROOM: [InventoryEntry; 10] = [
    InventoryEntry { object: "cloth sheet", material: "cloth", count: 1, size: [1.0, 0.05, 1.2], base: 0.0 },
    InventoryEntry { object: "cardboard box", material: "cardboard", count: 8, size: [0.5, 0.4, 0.4], base: 0.0 },
    InventoryEntry { object: "chair", material: "fiber", count: 3, size: [0.5, 0.5, 0.9], base: 0.0 },
    InventoryEntry { object: "door", material: "wood", count: 2, size: [0.9, 0.05, 2.0], base: 0.0 },
    InventoryEntry { object: "desk", material: "wood", count: 3, size: [1.2, 0.6, 0.75], base: 0.0 },
    InventoryEntry { object: "mat", material: "rubber", count: 1, size: [1.0, 0.6, 0.05], base: 0.0 },
    InventoryEntry { object: "plastic board", material: "plastic", count: 1, size: [0.9, 0.05, 0.6], base: 0.3 },
    InventoryEntry { object: "screen", material: "polyester", count: 1, size: [1.2, 0.1, 0.8], base: 0.6 },
    InventoryEntry { object: "poster", material: "paper", count: 3, size: [0.6, 0.02, 0.85], base: 0.8 },
    InventoryEntry { object: "robot", material: "metal", count: 2, size: [0.5, 0.5, 0.6], base: 0.0 },
];

/// Surveyed materials outside the label set map to `Other`.
pub fn label_for(material: &str) -> MaterialLabel {
    MaterialLabel::from_str(material).unwrap_or(MaterialLabel::Other)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub material: MaterialLabel,
    pub min: Point3<f64>,
    pub max: Point3<f64>,
    pub color: [u8; 3],
}

/// Gap between neighboring objects along the row.
pub const OBJECT_GAP: f64 = 0.9;
/// Ground-truth boxes are the object boxes grown by this much.
pub const GT_MARGIN: f64 = 0.02;

/// The room's objects, interleaved round-robin across inventory entries.
pub fn conference_room_objects() -> Vec<SceneObject> {
    let palette = Palette::default();
    let mut order = Vec::new();
    let max_count = CONFERENCE_ROOM.iter().map(|e| e.count).max().unwrap_or(0);
    for k in 0..max_count {
        for e in CONFERENCE_ROOM.iter().filter(|e| k < e.count) {
            order.push((e, k));
        }
    }
    let mut x = 0.0;
    order
        .into_iter()
        .map(|(e, k)| {
            let [w, d, h] = e.size;
            let material = label_for(e.material);
            let base = palette.color(material);
            let shade = (k as u8).wrapping_mul(9);
            let obj = SceneObject {
                name: format!("{} {}", e.object, k + 1),
                material,
                min: Point3::new(x, -d / 2.0, e.base),
                max: Point3::new(x + w, d / 2.0, e.base + h),
                color: base.map(|c| c.saturating_sub(shade)),
            };
            x += w + OBJECT_GAP;
            obj
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Fraction of detections whose material is replaced by a wrong one.
    pub flip_rate: f64,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Camera spacing along the row, meters.
    pub spacing: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            flip_rate: 0.0,
            seed: 0,
            width: 320,
            height: 240,
            spacing: 1.5,
        }
    }
}

/// A rendered recording held in memory.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub objects: Vec<SceneObject>,
    pub sequence: Sequence<f64>,
    pub depth: Vec<DepthImage>,
    pub rgb: Vec<RgbImage>,
    pub groundtruth: GroundTruthMap<f64>,
    /// Number of detections whose material was flipped.
    pub flipped: usize,
}

fn normalize(p: Point3<f64>) -> Point3<f64> {
    p * (1.0 / p.norm())
}

/// Camera-to-world pose looking from `eye` at `target` with world z up.
pub fn look_at(eye: Point3<f64>, target: Point3<f64>) -> Result<Pose<f64>> {
    let f = normalize(target - eye);
    let r = normalize(f.cross(&Point3::new(0.0, 0.0, 1.0)));
    let d = f.cross(&r);
    // rotation matrix with columns (r, d, f), converted to a quaternion
    let m = [[r.x, d.x, f.x], [r.y, d.y, f.y], [r.z, d.z, f.z]];
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [(m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s, 0.25 * s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s, (m[2][1] - m[1][2]) / s]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [(m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s, (m[0][2] - m[2][0]) / s]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [(m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s, (m[1][0] - m[0][1]) / s]
    };
    Pose::from_unnormalized(eye, q)
}

/// Entry distance of a ray into a box, if it hits in front of the origin.
fn ray_box(o: Point3<f64>, dir: Point3<f64>, lo: Point3<f64>, hi: Point3<f64>) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        let (o, d, lo, hi) = (o.to_array()[k], dir.to_array()[k], lo.to_array()[k], hi.to_array()[k]);
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - o) / d, (hi - o) / d);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

/// Minimum visible pixels for an object to be detected in a frame.
const MIN_PIXELS: usize = 30;

fn render(
    objects: &[SceneObject],
    intr: &CameraIntrinsics<f64>,
    pose: &Pose<f64>,
) -> (DepthImage, RgbImage, Vec<(usize, BBox2D<f64>)>) {
    let (w, h) = (intr.width, intr.height);
    let mut depth = DepthImage::zeros(w, h);
    let mut rgb = RgbImage::filled(w, h, [0, 0, 0]);
    // (count, u0, v0, u1, v1)
    let mut hits = vec![(0usize, u32::MAX, u32::MAX, 0u32, 0u32); objects.len()];
    let eye = pose.translation();
    let near: Vec<usize> = (0..objects.len())
        .filter(|&i| (objects[i].min.x - eye.x).abs() < 8.0 || (objects[i].max.x - eye.x).abs() < 8.0)
        .collect();
    for v in 0..h {
        for u in 0..w {
            let ray = Point3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0);
            let dir = pose.rotate(ray);
            let mut best: Option<(f64, usize)> = None;
            for &i in &near {
                if let Some(t) = ray_box(eye, dir, objects[i].min, objects[i].max) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            let Some((t, i)) = best else { continue };
            let mm = (t * 1000.0).round();
            if mm < 1.0 || mm > f64::from(u16::MAX) {
                continue;
            }
            depth.set(u, v, mm as u16);
            rgb.set(u, v, objects[i].color);
            let e = &mut hits[i];
            *e = (e.0 + 1, e.1.min(u), e.2.min(v), e.3.max(u), e.4.max(v));
        }
    }
    let boxes = hits
        .iter()
        .enumerate()
        .filter(|(_, e)| e.0 >= MIN_PIXELS)
        .map(|(i, e)| {
            (
                i,
                BBox2D {
                    x: f64::from(e.1),
                    y: f64::from(e.2),
                    w: f64::from(e.3 - e.1 + 1),
                    h: f64::from(e.4 - e.2 + 1),
                },
            )
        })
        .collect();
    (depth, rgb, boxes)
}

fn flip_materials(dets: &mut DetectionMap<f64>, rate: f64, rng: &mut impl Rng) -> usize {
    let mut all: Vec<&mut Detection2D<f64>> = dets.values_mut().flatten().collect();
    let n = (rate * all.len() as f64).round() as usize;
    all.shuffle(rng);
    for d in all.into_iter().take(n) {
        let current = d.material.unwrap_or(MaterialLabel::Other);
        let choices: Vec<MaterialLabel> = MaterialLabel::ALL.iter().copied().filter(|&m| m != current).collect();
        d.material = Some(*choices.choose(rng).expect("ten alternatives"));
    }
    n
}

fn frame_paths(k: usize) -> (PathBuf, PathBuf) {
    (PathBuf::from(format!("rgb/{k:04}.ppm")), PathBuf::from(format!("depth/{k:04}.pgm")))
}

/// Renders the conference-room sweep.
pub fn conference_room(opts: &SynthOptions) -> Result<SynthScene> {
    if !(0.0..=1.0).contains(&opts.flip_rate) || opts.spacing <= 0.0 {
        return Err(Error::Config("flip_rate must be in [0, 1] and spacing positive".into()));
    }
    let objects = conference_room_objects();
    let scale = f64::from(opts.width) / 320.0;
    let intr = CameraIntrinsics::new(
        262.5 * scale,
        262.5 * scale,
        (f64::from(opts.width) - 1.0) / 2.0,
        (f64::from(opts.height) - 1.0) / 2.0,
        opts.width,
        opts.height,
    )?;
    let x_end = objects.last().map_or(0.0, |o| o.max.x);
    let mut frames = Vec::new();
    let mut depth = Vec::new();
    let mut rgb = Vec::new();
    let mut dets = DetectionMap::new();
    let mut x = 0.0;
    let mut k = 0usize;
    while x <= x_end + 1e-9 {
        let pose = look_at(Point3::new(x, -3.2, 1.7), Point3::new(x, 0.0, 0.6))?;
        let (d, c, boxes) = render(&objects, &intr, &pose);
        let frame_id = k as u64;
        let list: Vec<Detection2D<f64>> = boxes
            .into_iter()
            .map(|(i, bbox)| Detection2D {
                frame_id,
                bbox,
                object_label: objects[i].name.clone(),
                confidence: 1.0,
                material: Some(objects[i].material),
            })
            .collect();
        if !list.is_empty() {
            dets.insert(frame_id, list);
        }
        let (rgb_path, depth_path) = frame_paths(k);
        frames.push(FrameRecord {
            frame_id,
            timestamp: k as f64 * 0.1,
            rgb_path,
            depth_path,
            pose,
        });
        depth.push(d);
        rgb.push(c);
        x += opts.spacing;
        k += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let flipped = flip_materials(&mut dets, opts.flip_rate, &mut rng);
    let m = Point3::new(GT_MARGIN, GT_MARGIN, GT_MARGIN);
    let gt = objects
        .iter()
        .enumerate()
        .map(|(i, o)| Ok(BBox3D::new(o.min - m, o.max + m, o.material, i as u32)?.with_label(o.name.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthScene {
        objects,
        sequence: Sequence {
            intrinsics: intr,
            frames,
            detections: dets,
            base_dir: PathBuf::new(),
            detections_file: Some("detections.jsonl".into()),
        },
        depth,
        rgb,
        groundtruth: GroundTruthMap::Objects(gt),
        flipped,
    })
}

/// One frame looking at a flat wooden panel 2 m away: constant depth over a
/// centered rectangle and a single detection covering it.
pub fn single_box() -> Result<SynthScene> {
    let intr = CameraIntrinsics::new(100.0, 100.0, 31.5, 23.5, 64, 48)?;
    let mut depth = DepthImage::zeros(64, 48);
    let mut rgb = RgbImage::filled(64, 48, [0, 0, 0]);
    let (u0, v0, u1, v1) = (16u32, 12u32, 48u32, 36u32);
    for v in v0..v1 {
        for u in u0..u1 {
            depth.set(u, v, 2000);
            rgb.set(u, v, [120, 70, 20]);
        }
    }
    let bbox = BBox2D {
        x: f64::from(u0),
        y: f64::from(v0),
        w: f64::from(u1 - u0),
        h: f64::from(v1 - v0),
    };
    let mut dets = DetectionMap::new();
    dets.insert(
        0,
        vec![Detection2D {
            frame_id: 0,
            bbox,
            object_label: "panel".into(),
            confidence: 0.9,
            material: Some(MaterialLabel::Wood),
        }],
    );
    let lo = Point3::new((f64::from(u0) - 31.5) * 0.02, (f64::from(v0) - 23.5) * 0.02, 2.0);
    let hi = Point3::new((f64::from(u1) - 31.5) * 0.02, (f64::from(v1) - 23.5) * 0.02, 2.0);
    let m = Point3::new(GT_MARGIN, GT_MARGIN, GT_MARGIN);
    let gt = BBox3D::new(lo - m, hi + m, MaterialLabel::Wood, 0)?.with_label("panel");
    let (rgb_path, depth_path) = frame_paths(0);
    Ok(SynthScene {
        objects: vec![SceneObject {
            name: "panel".into(),
            material: MaterialLabel::Wood,
            min: lo,
            max: hi,
            color: [120, 70, 20],
        }],
        sequence: Sequence {
            intrinsics: intr,
            frames: vec![FrameRecord {
                frame_id: 0,
                timestamp: 0.0,
                rgb_path,
                depth_path,
                pose: Pose::identity(),
            }],
            detections: dets,
            base_dir: PathBuf::new(),
            detections_file: Some("detections.jsonl".into()),
        },
        depth: vec![depth],
        rgb: vec![rgb],
        groundtruth: GroundTruthMap::Objects(vec![gt]),
        flipped: 0,
    })
}

/// A recording with no frames.
pub fn empty_sequence() -> Result<Sequence<f64>> {
    Ok(Sequence {
        intrinsics: CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480)?,
        frames: Vec::new(),
        detections: BTreeMap::new(),
        base_dir: PathBuf::new(),
        detections_file: None,
    })
}

/// Paths written by [`write_scene`].
#[derive(Debug, Clone)]
pub struct SceneFiles {
    pub manifest: PathBuf,
    pub groundtruth: PathBuf,
}

/// Writes images, manifest, detections and ground truth under `dir`.
pub fn write_scene(scene: &SynthScene, dir: &Path) -> Result<SceneFiles> {
    for sub in ["rgb", "depth"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    for ((f, d), c) in scene.sequence.frames.iter().zip(&scene.depth).zip(&scene.rgb) {
        d.write_pgm(&dir.join(&f.depth_path))?;
        c.write_ppm(&dir.join(&f.rgb_path))?;
    }
    let manifest = scene.sequence.save(dir, "manifest.json")?;
    let groundtruth = dir.join("groundtruth.jsonl");
    fs::write(&groundtruth, scene.groundtruth.to_jsonl()).map_err(|e| Error::io(&groundtruth, e))?;
    Ok(SceneFiles { manifest, groundtruth })
}
