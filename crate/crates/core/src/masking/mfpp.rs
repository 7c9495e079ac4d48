use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::mask_stream;
use super::slic::{slic_segment, Segmentation, SlicParams};
use super::{check_keep_prob, MaskBatch, MaskError, MaskSource};
use crate::raster::{GrayRaster, ImageRaster};

/// Multi-scale fragment perturbation: one SLIC segmentation per scale, each
/// fragment kept independently with `keep_prob`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfppParams {
    /// Fragment counts per pyramid level, strictly increasing.
    pub scales: Vec<usize>,
    pub keep_prob: f64,
    pub slic: SlicParams,
}

impl Default for MfppParams {
    fn default() -> Self {
        Self {
            scales: vec![50, 100, 200],
            keep_prob: 0.25,
            slic: SlicParams::default(),
        }
    }
}

impl MfppParams {
    pub fn validate(&self) -> Result<(), MaskError> {
        check_keep_prob(self.keep_prob)?;
        let increasing = self.scales.windows(2).all(|w| w[0] < w[1]);
        if self.scales.is_empty() || self.scales[0] == 0 || !increasing {
            return Err(MaskError::Scales(self.scales.clone()));
        }
        Ok(())
    }
}

/// Masks are spread round-robin over the scales: mask `i` uses scale
/// `i % scales.len()`. Segmentations are computed once here and shared by
/// every mask of the batch.
pub fn gen_mfpp_masks(img: &ImageRaster, params: MfppParams, count: usize, seed: u64) -> Result<MaskBatch, MaskError> {
    params.validate()?;
    if count == 0 {
        return Err(MaskError::EmptyBatch);
    }
    let segmentations = params
        .scales
        .iter()
        .map(|&k| slic_segment(img, k, params.slic.compactness, params.slic.iterations))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MaskBatch::from_source(
        img.width(),
        img.height(),
        count,
        seed,
        MaskSource::Mfpp {
            params,
            segmentations: Arc::new(segmentations),
        },
    ))
}

pub(super) fn mfpp_mask(params: &MfppParams, segmentations: &[Segmentation], seed: u64, index: usize) -> GrayRaster {
    let seg = &segmentations[index % segmentations.len()];
    let mut rng = mask_stream(seed, index as u64);
    let keep: Vec<f32> = (0..seg.count())
        .map(|_| if rng.random::<f64>() < params.keep_prob { 1.0 } else { 0.0 })
        .collect();
    GrayRaster {
        width: seg.width(),
        height: seg.height(),
        data: seg.labels().iter().map(|&l| keep[l as usize]).collect(),
    }
}
