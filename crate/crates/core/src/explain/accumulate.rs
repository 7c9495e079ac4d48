use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::masking::MaskBatch;
use crate::raster::GrayRaster;

/// Per-pixel divisor of the weighted mask sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the pixel's total mask value (weighted mean over masks that
    /// kept it); pixels never kept get 0.
    #[default]
    MaskSum,
    /// Divide by the number of masks.
    Count,
}

/// Running `sum_i w_i * M_i(x, y)` and `sum_i M_i(x, y)`.
#[derive(Debug, Clone)]
pub struct SaliencyAccumulator {
    width: usize,
    height: usize,
    weighted: Vec<f64>,
    coverage: Vec<f64>,
    count: usize,
}

impl SaliencyAccumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            weighted: vec![0.0; width * height],
            coverage: vec![0.0; width * height],
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, mask: &GrayRaster, weight: f64) -> Result<(), ExplainError> {
        if (mask.width, mask.height) != (self.width, self.height) {
            return Err(ExplainError::InvalidConfig(format!(
                "mask is {}x{}, accumulator is {}x{}",
                mask.width, mask.height, self.width, self.height
            )));
        }
        for ((s, c), &m) in self.weighted.iter_mut().zip(&mut self.coverage).zip(&mask.data) {
            let m = m as f64;
            *s += weight * m;
            *c += m;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &SaliencyAccumulator) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.weighted.iter_mut().zip(&other.weighted) {
            *a += b;
        }
        for (a, b) in self.coverage.iter_mut().zip(&other.coverage) {
            *a += b;
        }
        self.count += other.count;
    }

    /// Row-major saliency values.
    pub fn finish(&self, normalization: Normalization) -> Vec<f64> {
        match normalization {
            Normalization::Count => {
                let n = self.count.max(1) as f64;
                self.weighted.iter().map(|s| s / n).collect()
            }
            Normalization::MaskSum => self
                .weighted
                .iter()
                .zip(&self.coverage)
                .map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 })
                .collect(),
        }
    }
}

/// `S(x,y) = sum_i w_i M_i(x,y) / Z(x,y)` over a whole batch.
pub fn accumulate_saliency(masks: &MaskBatch, weights: &[f64], normalization: Normalization) -> Result<Vec<f64>, ExplainError> {
    if weights.len() != masks.len() {
        return Err(ExplainError::LengthMismatch {
            weights: weights.len(),
            masks: masks.len(),
        });
    }
    let mut acc = SaliencyAccumulator::new(masks.width(), masks.height());
    for (m, &w) in masks.iter().zip(weights) {
        acc.add(&m, w)?;
    }
    Ok(acc.finish(normalization))
}
