//! Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage
//! or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detection::Detection;
use crate::detector::protocol::serve;
use crate::detector::{SyntheticDetector, SyntheticScene};
use crate::explain::Method;
use crate::geometry::BBox;
use crate::raster::ImageRaster;
use crate::reporting::{
    run_evaluate, run_explain, run_report, DetectorSpec, EvaluateRequest, ExplainRequest, ImageInput, ReportingError,
    RunConfig, RunManifest,
};

#[derive(Debug, Parser)]
#[command(name = "boxlens", version, about = "Black-box saliency and faithfulness metrics for object detectors")]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Produce saliency maps and heatmaps for detections.
    Explain(ExplainArgs),
    /// Score saliency maps from an explain run.
    Evaluate(EvaluateArgs),
    /// Export a mask batch as PNG files.
    Masks(MasksArgs),
    /// Merge metric CSV files.
    Report(ReportArgs),
    /// Serve a synthetic scene over the detector protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set explain.rise.keep_prob=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Explanation method (rise, drise, dmfpp, dsliding, lime).
    #[arg(long)]
    pub method: Option<String>,
    /// Number of random masks.
    #[arg(long)]
    pub masks: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Objectness threshold for selecting targets.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Deletion IoU threshold for the localisation-aware variants.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Deletion step count.
    #[arg(long)]
    pub steps: Option<usize>,
}

impl ConfigArgs {
    fn is_empty(&self) -> bool {
        self.config.is_none()
            && self.sets.is_empty()
            && self.method.is_none()
            && self.masks.is_none()
            && self.seed.is_none()
            && self.threshold.is_none()
            && self.gamma.is_none()
            && self.steps.is_none()
    }

    /// File, then `BOXLENS_SEED`, then `--set`, then named flags.
    fn resolve(&self, base: RunConfig) -> Result<RunConfig, ReportingError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => base,
        };
        cfg.apply_env()?;
        for s in &self.sets {
            cfg.apply_override(s)?;
        }
        if let Some(m) = &self.method {
            cfg.explain.method = m.parse().map_err(|e: crate::explain::ExplainError| ReportingError::Config(e.to_string()))?;
        }
        if let Some(v) = self.masks {
            cfg.explain.masks = v;
        }
        if let Some(v) = self.seed {
            cfg.explain.seed = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.gamma {
            cfg.metrics.gamma = v;
        }
        if let Some(v) = self.steps {
            cfg.metrics.steps = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// `synthetic:<scene.json>` or `exec:<command line>`.
    #[arg(long)]
    pub detector: Option<String>,
    /// Input PNG; repeatable. A synthetic detector defaults to its own scene.
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    /// Explicit target `x1,y1,x2,y2,class`; repeatable.
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// Repeat the run recorded in an explain manifest.
    #[arg(long, conflicts_with_all = ["detector", "images", "targets"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Manifest of the explain run to score.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Detector override; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub detector: Option<String>,
    /// Fill for removed pixels (black, gray, mean).
    #[arg(long)]
    pub fill: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MasksArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Image that fixes the size (and the segmentation for dmfpp).
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 224)]
    pub width: usize,
    #[arg(long, default_value_t = 224)]
    pub height: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric CSV files to merge.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the merged report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Synthetic scene JSON.
    #[arg(long)]
    pub scene: PathBuf,
    /// Reference image; defaults to the scene's rendering.
    #[arg(long)]
    pub image: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ReportingError> for Failure {
    fn from(e: ReportingError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Explain(a) => explain_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Masks(a) => masks_cmd(a),
        Command::Report(a) => {
            let r = run_report(&a.inputs, &a.out, a.json.as_deref())?;
            println!("{} rows merged into {}", r.rows.len(), a.out.display());
            Ok(0)
        }
        Command::Serve(a) => serve_cmd(a),
    }
}

fn parse_target(s: &str) -> Result<Detection, Failure> {
    let bad = || Failure::Usage(format!("target {s:?} must be x1,y1,x2,y2,class"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(bad());
    }
    let mut c = [0.0; 4];
    for (v, p) in c.iter_mut().zip(&parts) {
        *v = p.parse().map_err(|_| bad())?;
    }
    let class: usize = parts[4].parse().map_err(|_| bad())?;
    let bbox = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Failure::Usage(format!("target {s:?}: {e}")))?;
    Detection::reduced(bbox, 1.0, class).map_err(|e| Failure::Usage(e.to_string()))
}

fn explain_cmd(a: ExplainArgs) -> Result<i32, Failure> {
    let req = match &a.manifest {
        Some(path) => {
            if !a.config.is_empty() {
                return Err(Failure::Usage("--manifest replays a recorded run and takes no config options".into()));
            }
            ExplainRequest::from_manifest(&RunManifest::load(path)?, &a.out)?
        }
        None => {
            let spec: DetectorSpec = a
                .detector
                .as_deref()
                .ok_or_else(|| Failure::Usage("--detector is required without --manifest".into()))?
                .parse()?;
            let config = a.config.resolve(RunConfig::default())?;
            let targets = if a.targets.is_empty() {
                None
            } else {
                Some(a.targets.iter().map(|t| parse_target(t)).collect::<Result<Vec<_>, _>>()?)
            };
            let images = if a.images.is_empty() && targets.is_some() {
                vec![ImageInput {
                    id: "scene".into(),
                    path: None,
                    targets: targets.clone(),
                }]
            } else {
                ImageInput::from_paths(&a.images, targets)
            };
            ExplainRequest {
                config,
                detector: spec,
                images,
                out_dir: a.out.clone(),
            }
        }
    };
    let manifest = run_explain(&req)?;
    let targets: usize = manifest.images.iter().map(|i| i.targets.len()).sum();
    println!(
        "{} image(s), {targets} target(s); manifest at {}",
        manifest.images.len(),
        a.out.join("manifest.json").display()
    );
    let failed = manifest.failed_images();
    if failed > 0 {
        eprintln!("error: {failed} image(s) failed; see the manifest");
        return Ok(1);
    }
    Ok(0)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<i32, Failure> {
    let source = RunManifest::load(&a.manifest)?;
    let mut config = a.config.resolve(source.config.clone())?;
    if let Some(f) = &a.fill {
        config.apply_override(&format!("metrics.fill={f}"))?;
    }
    let detector = a.detector.as_deref().map(str::parse).transpose()?;
    let (report, _) = run_evaluate(&EvaluateRequest {
        config,
        explain_manifest: a.manifest.clone(),
        detector,
        out_dir: a.out.clone(),
    })?;
    println!(
        "{} row(s), {} scored; report at {}",
        report.rows.len(),
        report.overall.count,
        a.out.join("metrics.csv").display()
    );
    Ok(0)
}

fn masks_cmd(a: MasksArgs) -> Result<i32, Failure> {
    let cfg = a.config.resolve(RunConfig::default())?;
    let img = match &a.image {
        Some(p) => ImageRaster::load_png(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => {
            if cfg.explain.method == Method::Dmfpp {
                return Err(Failure::Usage("dmfpp masks need --image for the segmentation".into()));
            }
            ImageRaster::filled(a.width, a.height, 3, 0.0).map_err(|e| Failure::Usage(e.to_string()))?
        }
    };
    let batch = cfg
        .explain
        .mask_batch(&img)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    batch.export_png(&a.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{} mask(s) written to {}", batch.len(), a.out.display());
    Ok(0)
}

fn serve_cmd(a: ServeArgs) -> Result<i32, Failure> {
    let scene = SyntheticScene::load(&a.scene).map_err(|e| Failure::Usage(e.to_string()))?;
    let det = match &a.image {
        Some(p) => SyntheticDetector::new(scene, load(p)?),
        None => SyntheticDetector::from_scene(scene),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve(&det, stdin.lock(), stdout.lock()).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(0)
}

fn load(p: &Path) -> Result<ImageRaster, Failure> {
    ImageRaster::load_png(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}
