//! Newline-delimited JSON detector protocol.
//!
//! The detector process writes a [`Handshake`] as its first line, then answers
//! every [`DetectorRequest`] line with a [`DetectorResponse`] line carrying the
//! same `id`. Responses may arrive in any order. Images travel as standard
//! base64 (no line wrapping) of row-major 8-bit RGB.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Detector, DetectorCapabilities, DetectorError};
use crate::detection::Detection;
use crate::geometry::BBox;
use crate::raster::ImageRaster;

pub const PROTOCOL_VERSION: u32 = 1;
pub const PIXEL_FORMAT_RGB8: &str = "rgb8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol_version: u32,
    pub num_classes: usize,
    pub has_class_probs: bool,
    pub confidence_threshold: f64,
}

impl Handshake {
    pub fn from_capabilities(caps: &DetectorCapabilities) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            num_classes: caps.num_classes,
            has_class_probs: caps.has_class_probs,
            confidence_threshold: caps.confidence_threshold,
        }
    }

    pub fn capabilities(&self) -> DetectorCapabilities {
        DetectorCapabilities {
            has_class_probs: self.has_class_probs,
            num_classes: self.num_classes,
            confidence_threshold: self.confidence_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRequest {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub pixel_format: String,
    pub data: String,
}

impl DetectorRequest {
    pub fn encode(id: u64, img: &ImageRaster) -> Self {
        let rgb = img.to_rgb().to_bytes();
        Self {
            id,
            width: img.width(),
            height: img.height(),
            pixel_format: PIXEL_FORMAT_RGB8.to_string(),
            data: STANDARD.encode(rgb),
        }
    }

    pub fn decode_image(&self) -> Result<ImageRaster, DetectorError> {
        if self.pixel_format != PIXEL_FORMAT_RGB8 {
            return Err(DetectorError::Protocol(format!("unsupported pixel_format {:?}", self.pixel_format)));
        }
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| DetectorError::Protocol(format!("bad base64: {e}")))?;
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        ImageRaster::new(self.width, self.height, 3, data).map_err(|e| DetectorError::Protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub objectness: f64,
    pub class_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probs: Option<Vec<f64>>,
}

impl WireDetection {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            x1: d.bbox.x1,
            y1: d.bbox.y1,
            x2: d.bbox.x2,
            y2: d.bbox.y2,
            objectness: d.objectness(),
            class_id: d.class_id(),
            class_probs: d.class_probs().map(<[f64]>::to_vec),
        }
    }

    /// Validate and clamp the box to the image.
    pub fn to_detection(&self, width: usize, height: usize) -> Result<Detection, DetectorError> {
        let bbox = BBox::new(self.x1, self.y1, self.x2, self.y2)
            .map_err(|e| DetectorError::Protocol(e.to_string()))?
            .clamp_to(width, height);
        Ok(match &self.class_probs {
            Some(p) => Detection::with_label_and_probs(bbox, self.objectness, self.class_id, p.clone())?,
            None => Detection::reduced(bbox, self.objectness, self.class_id)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse {
    pub id: u64,
    #[serde(default)]
    pub detections: Vec<WireDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Serve `detector` over the protocol until `reader` reaches end of input.
///
/// A malformed request that still carries a readable `id` gets an error
/// response; one without an id ends the session with an error.
pub fn serve<R: BufRead, W: Write>(detector: &dyn Detector, reader: R, mut writer: W) -> Result<(), DetectorError> {
    let io_err = |e: std::io::Error| DetectorError::transport(e.to_string());
    write_line(&mut writer, &Handshake::from_capabilities(&detector.capabilities())).map_err(io_err)?;
    for line in reader.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<DetectorRequest>(&line) {
            Ok(req) => match req.decode_image().and_then(|img| detector.detect(&img)) {
                Ok(dets) => DetectorResponse {
                    id: req.id,
                    detections: dets.iter().map(WireDetection::from_detection).collect(),
                    error: None,
                },
                Err(e) => DetectorResponse {
                    id: req.id,
                    detections: Vec::new(),
                    error: Some(e.to_string()),
                },
            },
            Err(e) => match extract_id(&line) {
                Some(id) => DetectorResponse {
                    id,
                    detections: Vec::new(),
                    error: Some(format!("malformed request: {e}")),
                },
                None => return Err(DetectorError::Protocol(format!("malformed request line: {e}"))),
            },
        };
        write_line(&mut writer, &response).map_err(io_err)?;
    }
    Ok(())
}

pub(crate) fn extract_id(line: &str) -> Option<u64> {
    serde_json::from_str::<serde_json::Value>(line).ok()?.get("id")?.as_u64()
}
