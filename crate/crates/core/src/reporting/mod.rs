//! Run orchestration and artifacts: configuration, saliency files, heatmap
//! overlays, metric reports and reproducibility manifests.

mod config;
mod heatmap;
mod manifest;
mod run;
mod salfile;

use thiserror::Error;

use crate::detector::DetectorError;
use crate::explain::ExplainError;
use crate::metrics::MetricsError;
use crate::raster::RasterError;

pub use config::{HeatmapSettings, RunConfig, SEED_ENV};
pub use heatmap::{lut_entry, lut_indices, render_heatmap, LUT_VERSION};
pub use manifest::{DetectorRecord, ImageRecord, RunKind, RunManifest, TargetRecord, MANIFEST_VERSION};
pub use run::{
    run_evaluate, run_explain, run_report, DetectorHandle, DetectorSpec, EvaluateRequest, ExplainRequest, ImageInput,
};
pub use salfile::{SaliencyFile, SALIENCY_MAGIC, SALIENCY_VERSION};

#[derive(Debug, Error)]
pub enum ReportingError {
    #[error("config: {0}")]
    Config(String),
    #[error("saliency file: {0}")]
    SaliencyFormat(String),
    #[error("render: {0}")]
    Render(String),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReportingError {
    /// Configuration and usage problems, as opposed to runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, ReportingError::Config(_))
    }
}
