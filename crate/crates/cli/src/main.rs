use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matmap::cafusion::gradcheck::check_fuse_level;
use matmap::cafusion::train::train_toy;
use matmap::cafusion::{fuse_level, FeatureMap, FusionWeights};
use matmap::config::{ClassifierMode, RunConfig};
use matmap::eval::evaluate_map;
use matmap::geometry::{read_ply, write_ply};
use matmap::pipeline::{run, segment_cloud};
use matmap::sequence::{load_boxes, load_groundtruth};
use matmap::synth::{conference_room, single_box, write_scene, SynthOptions};
use matmap::voxmap::SemanticMap;
use matmap::{Error, ErrorKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "matmap", version, about = "Material-labeled 3D semantic maps from RGB-D recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a recorded sequence and write map.ply, boxes.jsonl, metrics.json, timings.json.
    Run(RunArgs),
    /// Cluster and label a point cloud against 3D boxes.
    Segment(SegmentArgs),
    /// Score a labeled map against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the toy attention fusion on random tensors and check its gradients.
    DemoFusion(DemoArgs),
    /// Write a synthetic recording.
    Synth(SynthArgs),
}

/// Settings shared by every subcommand that segments. Flags override the
/// config file.
#[derive(Args, Clone, Default)]
struct MapArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Voxel edge lengths in meters, coarse to fine.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Cell adjacency: 6, 18 or 26.
    #[arg(long)]
    connectivity: Option<u32>,
    /// Max centroid-to-box distance for a label, meters.
    #[arg(long)]
    label_cutoff: Option<f64>,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Also require adjacent cells' mean colors within this RGB distance.
    #[arg(long)]
    color_threshold: Option<f64>,
    /// IoU needed to match a cluster box to a ground-truth box.
    #[arg(long)]
    match_iou: Option<f64>,
}

impl MapArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.scales {
            c.scales = v.clone();
        }
        set(&mut c.connectivity, self.connectivity);
        set(&mut c.label_cutoff, self.label_cutoff);
        set(&mut c.match_iou, self.match_iou);
        if self.palette.is_some() {
            c.palette = self.palette.clone();
        }
        if self.color_threshold.is_some() {
            c.color_threshold = self.color_threshold;
        }
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    groundtruth: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Pixel sampling step for back-projection.
    #[arg(long)]
    stride: Option<u32>,
    #[arg(long)]
    min_depth: Option<f64>,
    #[arg(long)]
    max_depth: Option<f64>,
    #[arg(long, value_enum)]
    classifier: Option<Classifier>,
    #[arg(long)]
    cafn_weights: Option<PathBuf>,
    #[arg(long)]
    cafn_seed: Option<u64>,
    /// Process every n-th frame.
    #[arg(long)]
    keyframe_interval: Option<usize>,
    /// Re-segment after every keyframe (for timing only).
    #[arg(long)]
    incremental: bool,
    /// Put stage timings into metrics.json (makes it non-reproducible).
    #[arg(long)]
    profile: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Classifier {
    Passthrough,
    ToyCafn,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = self.map.config()?;
        if self.manifest.is_some() {
            c.manifest = self.manifest.clone();
        }
        if self.groundtruth.is_some() {
            c.groundtruth = self.groundtruth.clone();
        }
        set(&mut c.output_dir, self.output_dir.clone());
        set(&mut c.stride, self.stride);
        set(&mut c.min_depth, self.min_depth);
        set(&mut c.max_depth, self.max_depth);
        if let Some(m) = self.classifier {
            c.classifier = match m {
                Classifier::Passthrough => ClassifierMode::Passthrough,
                Classifier::ToyCafn => ClassifierMode::ToyCafn,
            };
        }
        if self.cafn_weights.is_some() {
            c.cafn_weights = self.cafn_weights.clone();
        }
        set(&mut c.cafn_seed, self.cafn_seed);
        set(&mut c.keyframe_interval, self.keyframe_interval);
        c.incremental |= self.incremental;
        c.profile |= self.profile;
        Ok(c)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Input PLY with x, y, z (colors optional).
    #[arg(long)]
    cloud: PathBuf,
    /// 3D boxes, one JSON object per line.
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Labeled map PLY (with material_id and cluster_id).
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth, one JSON object per line.
    #[arg(long)]
    gt: PathBuf,
    /// Also write the report here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    channels: usize,
    #[arg(long, default_value_t = 8)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    width: usize,
    /// Use all-zero filters and biases.
    #[arg(long)]
    zero_weights: bool,
    /// Also run this many steps of toy training and report the loss.
    #[arg(long)]
    train_steps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scene {
    Conference,
    SingleBox,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Scene::Conference)]
    scene: Scene,
    /// Fraction of detections given a wrong material.
    #[arg(long, default_value_t = 0.0)]
    flip_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_run(a: &RunArgs) -> Result<(), Error> {
    let cfg = a.config()?;
    let (out, files) = run::<f64>(&cfg)?;
    eprintln!(
        "{} keyframes, {} points, {} boxes, {} clusters -> {}",
        out.keyframes,
        out.cloud_points,
        out.boxes.len(),
        out.map.num_clusters(),
        files.map.display()
    );
    for (stage, ms) in &out.timings.stages {
        eprintln!("  {stage:<9} {ms:9.2} ms");
    }
    eprintln!("  {:<9} {:9.2} ms", "total", out.timings.total_ms);
    Ok(())
}

fn cmd_segment(a: &SegmentArgs) -> Result<(), Error> {
    let cfg = a.map.config()?;
    cfg.validate()?;
    let palette = cfg.load_palette()?;
    let params = cfg.mscc_params::<f64>()?;
    let ply = read_ply::<f64>(&a.cloud)?;
    let boxes = load_boxes::<f64>(&a.boxes)?;
    let out = segment_cloud(&ply.cloud, &boxes, &params, cfg.label_cutoff, &palette).map_err(|e| e.in_stage("voxm"))?;
    write_ply(&out.map, &a.output).map_err(|e| e.in_stage("export"))?;
    eprintln!("{} points, {} clusters -> {}", out.map.len(), out.map.num_clusters(), a.output.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), Error> {
    let cfg = a.map.config()?;
    cfg.validate()?;
    let palette = cfg.load_palette()?;
    let map = SemanticMap::from_ply(read_ply::<f64>(&a.pred)?, &palette).map_err(|e| in_file(e, &a.pred))?;
    let gt = load_groundtruth::<f64>(&a.gt)?;
    let pad = cfg.scales.last().copied().unwrap_or(0.0) * 0.5;
    let report = evaluate_map(&map, &gt, cfg.match_iou, pad).map_err(|e| e.in_stage("eval"))?;
    let json = report.to_json();
    if let Some(p) = &a.output {
        std::fs::write(p, &json).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    print!("{json}");
    Ok(())
}

fn cmd_demo(a: &DemoArgs) -> Result<(), Error> {
    let (c, h, w) = (a.channels, a.height, a.width);
    if c == 0 || h == 0 || w == 0 || h > 8 || w > 8 || c > 8 {
        return Err(Error::Config("demo shapes must be 1..=8 in every dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let f_rgb = FeatureMap::<f64>::random(&mut rng, c, h, w, -1.0, 1.0);
    let f_depth = FeatureMap::<f64>::random(&mut rng, c, h, w, -1.0, 1.0);
    let weights = if a.zero_weights {
        FusionWeights::zeros(c)
    } else {
        FusionWeights::random(&mut rng, c, 0.5)
    };
    let (_, att) = fuse_level(&f_rgb, &f_depth, &weights)?;
    let (lo, hi) = att.alpha.min_max();
    println!("shape {c}x{h}x{w} seed {} weights {}", a.seed, if a.zero_weights { "zero" } else { "random" });
    println!("alpha min {lo:.12} max {hi:.12} mean {:.12}", att.alpha.mean());

    let mut violations = 0;
    for i in 0..h * w {
        let (ar, ad) = (att.alpha_rgb.data()[i], att.alpha_depth.data()[i]);
        let (af, al) = (att.alpha_fuse.data()[i], att.alpha.data()[i]);
        let ok = (0.0..=ar * ad).contains(&af) && al >= 0.0 && al <= ar.min(ad) && ar.min(ad) <= 1.0;
        violations += usize::from(!ok);
    }
    println!(
        "invariants {} ({violations} violations over {} pixels)",
        if violations == 0 { "ok" } else { "VIOLATED" },
        h * w
    );

    let g_alpha = FeatureMap::random(&mut rng, 1, h, w, -1.0, 1.0);
    let g_fuse = FeatureMap::random(&mut rng, c, h, w, -1.0, 1.0);
    let r = check_fuse_level(&f_rgb, &f_depth, &weights, &g_alpha, &g_fuse, 1e-5)?;
    println!(
        "gradcheck {} entries, max rel error {:.3e} at {}, max abs error {:.3e}",
        r.checked, r.max_rel_error, r.worst, r.max_abs_error
    );
    if let Some(steps) = a.train_steps {
        let t = train_toy(a.seed, steps, 20.0)?;
        println!(
            "train {steps} steps, loss {:.6} -> {:.6}",
            t.losses[0],
            t.losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Error> {
    let scene = match a.scene {
        Scene::Conference => conference_room(&SynthOptions {
            flip_rate: a.flip_rate,
            seed: a.seed,
            ..Default::default()
        })?,
        Scene::SingleBox => single_box()?,
    };
    let files = write_scene(&scene, &a.output)?;
    eprintln!(
        "{} frames, {} detections ({} flipped), {} objects -> {}",
        scene.sequence.frames.len(),
        scene.sequence.num_detections(),
        scene.flipped,
        scene.objects.len(),
        files.manifest.display()
    );
    Ok(())
}

fn in_file(e: Error, path: &Path) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: m,
        },
        e => e,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::DemoFusion(a) => cmd_demo(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Parse => 3,
                ErrorKind::Runtime => 4,
            })
        }
    }
}
