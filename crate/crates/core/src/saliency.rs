use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::Detection;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaliencyError {
    #[error("saliency length {len} does not match {width}x{height}")]
    LengthMismatch { len: usize, width: usize, height: usize },
    #[error("non-finite saliency value at index {0}")]
    NonFinite(usize),
}

/// Per-pixel importance for one target detection, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    pub target: Detection,
    pub method_tag: String,
}

impl SaliencyMap {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        target: Detection,
        method_tag: impl Into<String>,
    ) -> Result<Self, SaliencyError> {
        if values.len() != width * height {
            return Err(SaliencyError::LengthMismatch {
                len: values.len(),
                width,
                height,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SaliencyError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            values,
            target,
            method_tag: method_tag.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Apply `f` to every value. Fails if the result is not finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self, SaliencyError> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
            self.target.clone(),
            self.method_tag.clone(),
        )
    }

    /// Negative values clipped to zero.
    pub fn positive_part(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| v.max(0.0)).collect(),
            ..self.clone()
        }
    }

    /// Index of the maximum value; the first occurrence in row-major order wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
