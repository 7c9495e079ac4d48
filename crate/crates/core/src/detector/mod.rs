//! The black-box boundary. Everything downstream sees a detector only through
//! [`Detector::detect`]: image in, post-NMS, threshold-filtered detections out.

mod client;
pub mod protocol;
mod synthetic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{Detection, DetectionError};
use crate::raster::ImageRaster;

pub use client::ProtocolClient;
pub use synthetic::{synthetic_detect, SyntheticDetector, SyntheticObject, SyntheticScene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    /// The backend could not be reached or died; the call may be retried.
    #[error("detector transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("detector protocol error: {0}")]
    Protocol(String),
    #[error("invalid detector input: {0}")]
    InvalidInput(String),
    #[error("invalid detection from detector: {0}")]
    Validation(#[from] DetectionError),
    #[error("invalid scene: {0}")]
    Scene(String),
}

impl DetectorError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, DetectorError::Transport { retryable: true, .. })
    }

    pub(crate) fn transport(message: impl Into<String>) -> Self {
        DetectorError::Transport {
            message: message.into(),
            retryable: true,
        }
    }
}

/// What a detector reports about its outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorCapabilities {
    /// Full per-class probability vectors, as opposed to top class only.
    pub has_class_probs: bool,
    pub num_classes: usize,
    /// Threshold the detector applies before returning detections.
    pub confidence_threshold: f64,
}

impl Default for DetectorCapabilities {
    fn default() -> Self {
        Self {
            has_class_probs: false,
            num_classes: 1,
            confidence_threshold: 0.7,
        }
    }
}

pub trait Detector: Send + Sync {
    fn capabilities(&self) -> DetectorCapabilities;

    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError>;

    /// Maximum number of concurrent `detect` calls, `None` for unlimited.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }
}

impl<D: Detector + ?Sized> Detector for &D {
    fn capabilities(&self) -> DetectorCapabilities {
        (**self).capabilities()
    }
    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        (**self).detect(img)
    }
    fn max_concurrency(&self) -> Option<usize> {
        (**self).max_concurrency()
    }
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn capabilities(&self) -> DetectorCapabilities {
        (**self).capabilities()
    }
    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        (**self).detect(img)
    }
    fn max_concurrency(&self) -> Option<usize> {
        (**self).max_concurrency()
    }
}

impl<D: Detector + ?Sized> Detector for Arc<D> {
    fn capabilities(&self) -> DetectorCapabilities {
        (**self).capabilities()
    }
    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        (**self).detect(img)
    }
    fn max_concurrency(&self) -> Option<usize> {
        (**self).max_concurrency()
    }
}

/// Query an external detector over the wire protocol.
pub fn external_detect(client: &ProtocolClient, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
    client.detect(img)
}
