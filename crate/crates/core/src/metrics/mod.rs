//! Localisation metrics (pointing game, energy-based pointing game) and
//! deletion-based faithfulness metrics with their localisation-aware
//! variants.

mod deletion;
mod localization;
mod report;

use thiserror::Error;

use crate::detector::DetectorError;

pub use deletion::{
    auc, deletion_curve, deletion_order, evaluate_deletion, min_subset, removed_after, DeletionConfig, DeletionCurve,
    DeletionEvaluation, DeletionSettings, Variant,
};
pub use localization::{ebpg, pointing_game};
pub use report::{MetricReport, MetricRow, MetricSummary, CSV_HEADER};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("undefined EBPG: saliency map has no positive mass")]
    UndefinedEbpg,
    #[error("EBPG needs a non-negative saliency map")]
    NegativeSaliency,
    #[error("empty score curve")]
    EmptyCurve,
    #[error("map is {map:?} but image is {image:?}")]
    DimensionMismatch { map: (usize, usize), image: (usize, usize) },
    #[error("invalid deletion configuration: {0}")]
    InvalidConfig(String),
    #[error("detector failed at deletion step {step}: {source}")]
    Detector {
        step: usize,
        source: DetectorError,
        partial_plain: Vec<f64>,
        partial_d: Vec<f64>,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
