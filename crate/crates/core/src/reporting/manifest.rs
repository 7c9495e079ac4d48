use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ReportingError;
use crate::detection::Detection;
use crate::detector::protocol::Handshake;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Explain,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRecord {
    /// `synthetic:<scene>` or `exec:<command line>`.
    pub spec: String,
    pub handshake: Handshake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub index: usize,
    pub detection: Detection,
    /// Paths are relative to the manifest's directory.
    pub saliency_file: Option<String>,
    pub heatmap_file: Option<String>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    /// `None` when the image is the synthetic scene's own rendering.
    pub path: Option<String>,
    pub width: usize,
    pub height: usize,
    pub status: String,
    pub targets: Vec<TargetRecord>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub kind: RunKind,
    pub config_hash: String,
    pub config: RunConfig,
    pub heatmap_lut_version: u32,
    pub detector: DetectorRecord,
    pub images: Vec<ImageRecord>,
    /// Explain manifest an evaluate run read its maps from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportingError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ReportingError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReportingError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn failed_images(&self) -> usize {
        self.images.iter().filter(|i| i.status != "ok").count()
    }
}

pub(crate) fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
