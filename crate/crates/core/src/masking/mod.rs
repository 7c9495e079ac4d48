//! Perturbation masks: sliding-window occlusion, RISE random grids and MFPP
//! superpixel fragments, plus the SLIC segmentation that MFPP and LIME need.
//!
//! A [`MaskBatch`] is lazy: mask `i` is generated on demand from its own
//! random stream (see [`rng`]), so batches of thousands of full-resolution
//! masks never need to be held in memory at once.

mod mfpp;
mod rise;
pub mod rng;
mod slic;
mod sliding;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{GrayRaster, ImageRaster, RasterError};

pub use mfpp::{gen_mfpp_masks, MfppParams};
pub use rise::{gen_rise_masks, RiseParams};
pub use slic::{slic_segment, Segmentation, SlicParams};
pub use sliding::{gen_sliding_window_masks, SlidingWindowParams};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("invalid sliding window: window {window}, stride {stride} for a {width}x{height} image")]
    SlidingWindow {
        window: usize,
        stride: usize,
        width: usize,
        height: usize,
    },
    #[error("RISE grid {grid_h}x{grid_w} is finer than the {height}x{width} image")]
    GridTooFine {
        grid_h: usize,
        grid_w: usize,
        width: usize,
        height: usize,
    },
    #[error("keep probability must lie in (0, 1), got {0}")]
    KeepProb(f64),
    #[error("mask count must be positive")]
    EmptyBatch,
    #[error("MFPP scales must be non-empty, positive and strictly increasing: {0:?}")]
    Scales(Vec<usize>),
    #[error("segment count must satisfy 1 <= k <= {max}, got {k}")]
    SegmentCount { k: usize, max: usize },
    #[error("invalid segmentation: {0}")]
    Segmentation(String),
    #[error("mask is {mask:?} but image is {image:?}")]
    DimensionMismatch {
        mask: (usize, usize),
        image: (usize, usize),
    },
    #[error("fill has {got} channels, image has {expected}")]
    FillChannels { expected: usize, got: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("mask export: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    SlidingWindow,
    Rise,
    Mfpp,
}

#[derive(Debug, Clone)]
pub(crate) enum MaskSource {
    Sliding {
        params: SlidingWindowParams,
        xs: Vec<usize>,
        ys: Vec<usize>,
    },
    Rise(RiseParams),
    Mfpp {
        params: MfppParams,
        segmentations: Arc<Vec<Segmentation>>,
    },
}

/// A lazily generated, seeded sequence of `[0, 1]` masks of one image size.
#[derive(Debug, Clone)]
pub struct MaskBatch {
    width: usize,
    height: usize,
    count: usize,
    seed: u64,
    source: MaskSource,
}

impl MaskBatch {
    pub(crate) fn from_source(width: usize, height: usize, count: usize, seed: u64, source: MaskSource) -> Self {
        Self {
            width,
            height,
            count,
            seed,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator_kind(&self) -> GeneratorKind {
        match self.source {
            MaskSource::Sliding { .. } => GeneratorKind::SlidingWindow,
            MaskSource::Rise(_) => GeneratorKind::Rise,
            MaskSource::Mfpp { .. } => GeneratorKind::Mfpp,
        }
    }

    /// Segmentations backing an MFPP batch, one per scale.
    pub fn segmentations(&self) -> Option<&[Segmentation]> {
        match &self.source {
            MaskSource::Mfpp { segmentations, .. } => Some(segmentations),
            _ => None,
        }
    }

    /// Generate mask `index`.
    ///
    /// # Panics
    /// If `index >= self.len()`.
    pub fn mask(&self, index: usize) -> GrayRaster {
        assert!(index < self.count, "mask index {index} out of range {}", self.count);
        match &self.source {
            MaskSource::Sliding { params, xs, ys } => sliding::window_mask(self.width, self.height, params, xs, ys, index),
            MaskSource::Rise(params) => rise::rise_mask(self.width, self.height, params, self.seed, index),
            MaskSource::Mfpp { params, segmentations } => mfpp::mfpp_mask(params, segmentations, self.seed, index),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = GrayRaster> + '_ {
        (0..self.count).map(|i| self.mask(i))
    }

    /// Write every mask as 8-bit grayscale `mask_{index:06}.png` into `dir`.
    pub fn export_png(&self, dir: impl AsRef<Path>) -> Result<(), MaskError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (i, m) in self.iter().enumerate() {
            m.save_png(dir.join(format!("mask_{i:06}.png")))?;
        }
        Ok(())
    }
}

/// Value written where a mask removes image content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    #[default]
    Black,
    Gray,
    /// Per-channel mean of the image being perturbed.
    Mean,
}

impl Fill {
    pub fn values(&self, img: &ImageRaster) -> Vec<f32> {
        match self {
            Fill::Black => vec![0.0; img.channels()],
            Fill::Gray => vec![0.5; img.channels()],
            Fill::Mean => img.channel_means(),
        }
    }
}

pub(crate) fn check_keep_prob(p: f64) -> Result<(), MaskError> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(MaskError::KeepProb(p))
    }
}

/// Element-wise product `img ⊙ mask` (every channel scaled by the mask).
pub fn apply_mask(img: &ImageRaster, mask: &GrayRaster) -> Result<ImageRaster, MaskError> {
    let zeros = vec![0.0; img.channels()];
    apply_mask_with_fill(img, mask, &zeros)
}

/// `img * mask + fill * (1 - mask)`, with a per-channel fill colour.
pub fn apply_mask_with_fill(img: &ImageRaster, mask: &GrayRaster, fill: &[f32]) -> Result<ImageRaster, MaskError> {
    if (mask.width, mask.height) != img.dims() {
        return Err(MaskError::DimensionMismatch {
            mask: (mask.width, mask.height),
            image: img.dims(),
        });
    }
    let c = img.channels();
    if fill.len() != c {
        return Err(MaskError::FillChannels {
            expected: c,
            got: fill.len(),
        });
    }
    let mut out = Vec::with_capacity(img.data().len());
    for (px, &m) in img.data().chunks_exact(c).zip(&mask.data) {
        let m = m.clamp(0.0, 1.0);
        for (v, f) in px.iter().zip(fill) {
            out.push((v * m + f * (1.0 - m)).clamp(0.0, 1.0));
        }
    }
    Ok(ImageRaster::from_parts_unchecked(img.width(), img.height(), c, out))
}
