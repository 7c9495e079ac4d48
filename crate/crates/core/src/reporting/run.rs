use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use super::config::RunConfig;
use super::heatmap::{render_heatmap, LUT_VERSION};
use super::manifest::{now, DetectorRecord, ImageRecord, RunKind, RunManifest, TargetRecord, MANIFEST_VERSION};
use super::salfile::SaliencyFile;
use super::ReportingError;
use crate::detection::Detection;
use crate::detector::protocol::Handshake;
use crate::detector::{Detector, ProtocolClient, SyntheticDetector, SyntheticScene};
use crate::explain::explain;
use crate::metrics::{ebpg, evaluate_deletion, pointing_game, MetricReport, MetricRow};
use crate::raster::ImageRaster;
use crate::saliency::SaliencyMap;

/// Where detections come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectorSpec {
    /// In-process synthetic detector built from a scene file.
    Synthetic(PathBuf),
    /// Child process speaking the line-delimited JSON protocol.
    Exec(String),
}

impl FromStr for DetectorSpec {
    type Err = ReportingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("synthetic", path)) if !path.is_empty() => Ok(Self::Synthetic(PathBuf::from(path))),
            Some(("exec", cmd)) if !cmd.trim().is_empty() => Ok(Self::Exec(cmd.to_string())),
            _ => Err(ReportingError::Config(format!(
                "detector spec {s:?} must be synthetic:<scene.json> or exec:<command line>"
            ))),
        }
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Synthetic(p) => write!(f, "synthetic:{}", p.display()),
            Self::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

/// An opened detector. Synthetic detectors compare against the image being
/// explained, so they are instantiated per image.
pub enum DetectorHandle {
    Synthetic(SyntheticScene),
    Exec(ProtocolClient),
}

impl DetectorHandle {
    pub fn open(spec: &DetectorSpec) -> Result<Self, ReportingError> {
        match spec {
            DetectorSpec::Synthetic(path) => SyntheticScene::load(path)
                .map(Self::Synthetic)
                .map_err(|e| ReportingError::Config(e.to_string())),
            DetectorSpec::Exec(cmd) => Ok(Self::Exec(ProtocolClient::spawn(cmd)?)),
        }
    }

    pub fn handshake(&self) -> Handshake {
        match self {
            Self::Synthetic(scene) => Handshake::from_capabilities(&scene.capabilities()),
            Self::Exec(client) => client.handshake().clone(),
        }
    }

    /// Image used when a run names no input files.
    pub fn default_image(&self) -> Option<ImageRaster> {
        match self {
            Self::Synthetic(scene) => Some(scene.render()),
            Self::Exec(_) => None,
        }
    }

    pub fn for_image(&self, img: &ImageRaster) -> Result<Box<dyn Detector + '_>, ReportingError> {
        match self {
            Self::Synthetic(scene) => Ok(Box::new(SyntheticDetector::new(scene.clone(), img.clone())?)),
            Self::Exec(client) => Ok(Box::new(client)),
        }
    }
}

/// One image of an explain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub id: String,
    /// `None` selects the detector's default image.
    pub path: Option<PathBuf>,
    /// Explicit targets; `None` explains every detection at or above the
    /// configured threshold.
    pub targets: Option<Vec<Detection>>,
}

impl ImageInput {
    /// Inputs named after their file stems, made unique with a numeric suffix.
    pub fn from_paths(paths: &[PathBuf], targets: Option<Vec<Detection>>) -> Vec<Self> {
        let mut seen = HashSet::new();
        paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let stem = p.file_stem().map_or_else(|| format!("image{i}"), |s| s.to_string_lossy().into_owned());
                let id = if seen.insert(stem.clone()) { stem } else { format!("{stem}_{i}") };
                Self {
                    id,
                    path: Some(p.clone()),
                    targets: targets.clone(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExplainRequest {
    pub config: RunConfig,
    pub detector: DetectorSpec,
    pub images: Vec<ImageInput>,
    pub out_dir: PathBuf,
}

impl ExplainRequest {
    /// Repeat the run recorded in `manifest`, writing into `out_dir`.
    pub fn from_manifest(manifest: &RunManifest, out_dir: impl Into<PathBuf>) -> Result<Self, ReportingError> {
        if manifest.kind != RunKind::Explain {
            return Err(ReportingError::Config("manifest is not from an explain run".into()));
        }
        Ok(Self {
            config: manifest.config.clone(),
            detector: manifest.detector.spec.parse()?,
            images: manifest
                .images
                .iter()
                .map(|r| ImageInput {
                    id: r.id.clone(),
                    path: r.path.as_ref().map(PathBuf::from),
                    targets: Some(r.targets.iter().map(|t| t.detection.clone()).collect()),
                })
                .collect(),
            out_dir: out_dir.into(),
        })
    }
}

fn load_image(input_path: Option<&Path>, handle: &DetectorHandle) -> Result<ImageRaster, ReportingError> {
    match input_path {
        Some(p) => Ok(ImageRaster::load_png(p)?),
        None => handle
            .default_image()
            .ok_or_else(|| ReportingError::Config("no input image given and the detector has no default".into())),
    }
}

fn target_stem(image_id: &str, idx: usize) -> String {
    format!("{image_id}_t{idx:03}")
}

/// Explain every target of every image, writing one `.salm` map and one
/// heatmap PNG per target plus `manifest.json`. Per-image failures are
/// recorded in the manifest and do not stop the run.
pub fn run_explain(req: &ExplainRequest) -> Result<RunManifest, ReportingError> {
    req.config.validate()?;
    let started_at = now();
    let handle = DetectorHandle::open(&req.detector)?;
    std::fs::create_dir_all(&req.out_dir)?;
    let images = if req.images.is_empty() && handle.default_image().is_some() {
        vec![ImageInput {
            id: "scene".into(),
            path: None,
            targets: None,
        }]
    } else if req.images.is_empty() {
        return Err(ReportingError::Config("no input images".into()));
    } else {
        req.images.clone()
    };

    let records: Vec<ImageRecord> = images
        .par_iter()
        .map(|input| explain_image(req, &handle, input))
        .collect();

    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: RunKind::Explain,
        config_hash: req.config.hash(),
        config: req.config.clone(),
        heatmap_lut_version: LUT_VERSION,
        detector: DetectorRecord {
            spec: req.detector.to_string(),
            handshake: handle.handshake(),
        },
        images: records,
        source_manifest: None,
        outputs: Vec::new(),
        started_at,
        finished_at: now(),
    };
    manifest.save(req.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

fn explain_image(req: &ExplainRequest, handle: &DetectorHandle, input: &ImageInput) -> ImageRecord {
    let mut record = ImageRecord {
        id: input.id.clone(),
        path: input.path.as_ref().map(|p| p.to_string_lossy().into_owned()),
        width: 0,
        height: 0,
        status: "ok".into(),
        targets: Vec::new(),
    };
    let result = (|| -> Result<(), ReportingError> {
        let img = load_image(input.path.as_deref(), handle)?;
        (record.width, record.height) = img.dims();
        let detector = handle.for_image(&img)?;
        let targets = match &input.targets {
            Some(t) => t.clone(),
            None => detector
                .detect(&img)?
                .into_iter()
                .filter(|d| d.objectness() >= req.config.threshold)
                .collect(),
        };
        info!("{}: {} target(s)", input.id, targets.len());
        for (idx, target) in targets.into_iter().enumerate() {
            let stem = target_stem(&input.id, idx);
            let mut t = TargetRecord {
                index: idx,
                detection: target.clone(),
                saliency_file: None,
                heatmap_file: None,
                status: "ok".into(),
            };
            match explain_target(req, &img, &target, &*detector, &stem) {
                Ok((sal, heat)) => {
                    t.saliency_file = Some(sal);
                    t.heatmap_file = Some(heat);
                }
                Err(e) => {
                    warn!("{}: target {idx}: {e}", input.id);
                    t.status = format!("failed: {e}");
                }
            }
            record.targets.push(t);
        }
        if let Some(bad) = record.targets.iter().find(|t| t.status != "ok") {
            record.status = bad.status.clone();
        }
        Ok(())
    })();
    if let Err(e) = result {
        warn!("{}: {e}", input.id);
        record.status = format!("failed: {e}");
    }
    record
}

fn explain_target(
    req: &ExplainRequest,
    img: &ImageRaster,
    target: &Detection,
    detector: &dyn Detector,
    stem: &str,
) -> Result<(String, String), ReportingError> {
    let map = explain(img, target, detector, &req.config.explain)?;
    let sal = format!("{stem}.salm");
    SaliencyFile::from_map(&map)?.write(req.out_dir.join(&sal))?;
    let heat = format!("{stem}.png");
    let shown = if map.values().iter().any(|&v| v < 0.0) { map.positive_part() } else { map };
    render_heatmap(&shown, img, req.config.heatmap.alpha)?.save_png(req.out_dir.join(&heat))?;
    Ok((sal, heat))
}

#[derive(Debug, Clone)]
pub struct EvaluateRequest {
    pub config: RunConfig,
    /// Manifest written by [`run_explain`]; saliency paths resolve against
    /// its directory.
    pub explain_manifest: PathBuf,
    /// Overrides the detector recorded in the explain manifest.
    pub detector: Option<DetectorSpec>,
    pub out_dir: PathBuf,
}

/// Score every explained target and write `metrics.csv`, `metrics.json`
/// and `metrics_manifest.json`.
pub fn run_evaluate(req: &EvaluateRequest) -> Result<(MetricReport, RunManifest), ReportingError> {
    req.config.validate()?;
    let started_at = now();
    let source = RunManifest::load(&req.explain_manifest)?;
    if source.kind != RunKind::Explain {
        return Err(ReportingError::Config("evaluate needs a manifest from an explain run".into()));
    }
    let base_dir = req.explain_manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let spec = match &req.detector {
        Some(s) => s.clone(),
        None => source.detector.spec.parse()?,
    };
    let handle = DetectorHandle::open(&spec)?;
    std::fs::create_dir_all(&req.out_dir)?;

    let per_image: Vec<(Vec<MetricRow>, ImageRecord)> = source
        .images
        .par_iter()
        .map(|image| evaluate_image(req, &handle, &base_dir, image))
        .collect();
    let (rows, records): (Vec<Vec<MetricRow>>, Vec<ImageRecord>) = per_image.into_iter().unzip();
    let report = MetricReport::from_rows(rows.into_iter().flatten().collect());

    std::fs::write(req.out_dir.join("metrics.csv"), report.to_csv_string()?)?;
    std::fs::write(req.out_dir.join("metrics.json"), report.to_json()? + "\n")?;
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: RunKind::Evaluate,
        config_hash: req.config.hash(),
        config: req.config.clone(),
        heatmap_lut_version: LUT_VERSION,
        detector: DetectorRecord {
            spec: spec.to_string(),
            handshake: handle.handshake(),
        },
        images: records,
        source_manifest: Some(req.explain_manifest.to_string_lossy().into_owned()),
        outputs: vec!["metrics.csv".into(), "metrics.json".into()],
        started_at,
        finished_at: now(),
    };
    manifest.save(req.out_dir.join("metrics_manifest.json"))?;
    Ok((report, manifest))
}

fn evaluate_image(
    req: &EvaluateRequest,
    handle: &DetectorHandle,
    base_dir: &Path,
    image: &ImageRecord,
) -> (Vec<MetricRow>, ImageRecord) {
    let mut record = image.clone();
    let skip_all = |reason: &str| -> Vec<MetricRow> {
        image
            .targets
            .iter()
            .map(|t| MetricRow::skipped(&image.id, t.index, t.detection.class_id(), reason))
            .collect()
    };
    let img = match load_image(image.path.as_deref().map(Path::new), handle) {
        Ok(i) => i,
        Err(e) => {
            record.status = format!("failed: {e}");
            return (skip_all(&e.to_string()), record);
        }
    };
    let detector = match handle.for_image(&img) {
        Ok(d) => d,
        Err(e) => {
            record.status = format!("failed: {e}");
            return (skip_all(&e.to_string()), record);
        }
    };
    let mut rows = Vec::new();
    for (t, tr) in image.targets.iter().zip(record.targets.iter_mut()) {
        let row = evaluate_target(req, &img, &*detector, base_dir, &image.id, t);
        tr.status = if row.is_ok() { "ok".into() } else { row.status.clone() };
        rows.push(row);
    }
    record.status = "ok".into();
    (rows, record)
}

fn evaluate_target(
    req: &EvaluateRequest,
    img: &ImageRaster,
    detector: &dyn Detector,
    base_dir: &Path,
    image_id: &str,
    t: &TargetRecord,
) -> MetricRow {
    let class_id = t.detection.class_id();
    let Some(file) = &t.saliency_file else {
        return MetricRow::skipped(image_id, t.index, class_id, "missing saliency map");
    };
    let sal = match SaliencyFile::read(base_dir.join(file)) {
        Ok(s) => s,
        Err(e) => return MetricRow::skipped(image_id, t.index, class_id, format!("missing saliency map: {e}")),
    };
    if (sal.width as usize, sal.height as usize) != img.dims() {
        return MetricRow::skipped(image_id, t.index, class_id, "saliency size differs from image");
    }
    let values = sal.values.iter().map(|&v| v as f64).collect();
    let map = match SaliencyMap::new(img.width(), img.height(), values, t.detection.clone(), "loaded") {
        Ok(m) => m,
        Err(e) => return MetricRow::skipped(image_id, t.index, class_id, e.to_string()),
    };
    let cfg = req.config.metrics.for_target(&t.detection);
    let deletion = match evaluate_deletion(img, &map, detector, &cfg) {
        Ok(d) => d,
        Err(e) => return MetricRow::skipped(image_id, t.index, class_id, e.to_string()),
    };
    let pg = pointing_game(&map, &t.detection.bbox);
    let e = match ebpg(&map.positive_part(), &t.detection.bbox) {
        Ok(v) => Some(v),
        Err(err) => {
            warn!("{image_id}: target {}: {err}", t.index);
            None
        }
    };
    MetricRow::ok(image_id, t.index, class_id, &deletion, pg, e)
}

/// Merge CSV reports into one, recomputing the summaries.
pub fn run_report(inputs: &[PathBuf], out_csv: &Path, out_json: Option<&Path>) -> Result<MetricReport, ReportingError> {
    let mut reports = Vec::with_capacity(inputs.len());
    for p in inputs {
        let f = std::fs::File::open(p).map_err(|e| ReportingError::Config(format!("{}: {e}", p.display())))?;
        reports.push(MetricReport::read_csv(f)?);
    }
    let merged = MetricReport::merge(reports);
    std::fs::write(out_csv, merged.to_csv_string()?)?;
    if let Some(j) = out_json {
        std::fs::write(j, merged.to_json()? + "\n")?;
    }
    Ok(merged)
}
