use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("objectness out of range: {0}")]
    ObjectnessOutOfRange(f64),
    #[error("class probability out of range at index {index}: {value}")]
    ClassProbOutOfRange { index: usize, value: f64 },
    #[error("class_id {class_id} is not the argmax of class_probs (argmax {argmax})")]
    NotArgmax { class_id: usize, argmax: usize },
    #[error("class_id {class_id} outside probability vector of length {len}")]
    ClassOutOfRange { class_id: usize, len: usize },
    #[error("degenerate probability vector")]
    DegenerateVector,
    #[error("probability vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// One bounding-box proposal produced by a detector.
///
/// `class_probs` is present for detectors exposing the full per-class
/// probability vector; detectors that only report the top class leave it
/// empty ("reduced output").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct Detection {
    pub bbox: BBox,
    objectness: f64,
    class_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_probs: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawDetection {
    bbox: BBox,
    objectness: f64,
    class_id: usize,
    #[serde(default)]
    class_probs: Option<Vec<f64>>,
}

impl TryFrom<RawDetection> for Detection {
    type Error = DetectionError;

    fn try_from(r: RawDetection) -> Result<Self, Self::Error> {
        match r.class_probs {
            Some(p) => Detection::with_label_and_probs(r.bbox, r.objectness, r.class_id, p),
            None => Detection::reduced(r.bbox, r.objectness, r.class_id),
        }
    }
}

fn check_unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

impl Detection {
    /// Reduced-output detection: box, objectness and top class only.
    pub fn reduced(bbox: BBox, objectness: f64, class_id: usize) -> Result<Self, DetectionError> {
        if !check_unit(objectness) {
            return Err(DetectionError::ObjectnessOutOfRange(objectness));
        }
        Ok(Self {
            bbox,
            objectness,
            class_id,
            class_probs: None,
        })
    }

    /// Full-output detection; the class label is the argmax of `class_probs`
    /// (first index on ties).
    pub fn with_class_probs(
        bbox: BBox,
        objectness: f64,
        class_probs: Vec<f64>,
    ) -> Result<Self, DetectionError> {
        if !check_unit(objectness) {
            return Err(DetectionError::ObjectnessOutOfRange(objectness));
        }
        if class_probs.is_empty() {
            return Err(DetectionError::DegenerateVector);
        }
        for (index, &value) in class_probs.iter().enumerate() {
            if !check_unit(value) {
                return Err(DetectionError::ClassProbOutOfRange { index, value });
            }
        }
        let class_id = argmax(&class_probs);
        Ok(Self {
            bbox,
            objectness,
            class_id,
            class_probs: Some(class_probs),
        })
    }

    /// Full-output detection with an explicit label that must be an argmax.
    pub fn with_label_and_probs(
        bbox: BBox,
        objectness: f64,
        class_id: usize,
        class_probs: Vec<f64>,
    ) -> Result<Self, DetectionError> {
        if class_id >= class_probs.len() {
            return Err(DetectionError::ClassOutOfRange {
                class_id,
                len: class_probs.len(),
            });
        }
        let mut d = Self::with_class_probs(bbox, objectness, class_probs)?;
        let probs = d.class_probs.as_ref().expect("set above");
        if probs[class_id] < probs[d.class_id] {
            return Err(DetectionError::NotArgmax {
                class_id,
                argmax: d.class_id,
            });
        }
        d.class_id = class_id;
        Ok(d)
    }

    pub fn objectness(&self) -> f64 {
        self.objectness
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn class_probs(&self) -> Option<&[f64]> {
        self.class_probs.as_deref()
    }

    /// Same detection with objectness multiplied by `factor`, clamped to `[0, 1]`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            objectness: (self.objectness * factor).clamp(0.0, 1.0),
            ..self.clone()
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Cosine of the angle between two probability vectors.
pub fn cosine_similarity(p: &[f64], q: &[f64]) -> Result<f64, DetectionError> {
    if p.len() != q.len() {
        return Err(DetectionError::LengthMismatch(p.len(), q.len()));
    }
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(DetectionError::DegenerateVector);
    }
    Ok((dot / (np * nq)).clamp(-1.0, 1.0))
}
