use serde::{Deserialize, Serialize};

use super::{MaskBatch, MaskError, MaskSource};
use crate::raster::GrayRaster;

/// Occluding window of `window x window` pixels moved by `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlidingWindowParams {
    pub window: usize,
    pub stride: usize,
}

impl Default for SlidingWindowParams {
    fn default() -> Self {
        Self { window: 64, stride: 16 }
    }
}

impl SlidingWindowParams {
    pub fn validate(&self, height: usize, width: usize) -> Result<(), MaskError> {
        let ok = self.stride >= 1 && self.stride <= self.window && self.window <= height.min(width);
        if ok {
            Ok(())
        } else {
            Err(MaskError::SlidingWindow {
                window: self.window,
                stride: self.stride,
                width,
                height,
            })
        }
    }
}

/// Offsets `0, s, 2s, ...` up to the first window that reaches the border;
/// the last window is clipped rather than dropped.
fn offsets(extent: usize, window: usize, stride: usize) -> Vec<usize> {
    let n = (extent - window).div_ceil(stride) + 1;
    (0..n).map(|i| i * stride).collect()
}

/// One mask per window position, row-major over positions: ones everywhere
/// except zeros inside the (border-clipped) window.
pub fn gen_sliding_window_masks(
    height: usize,
    width: usize,
    params: SlidingWindowParams,
) -> Result<MaskBatch, MaskError> {
    params.validate(height, width)?;
    let ys = offsets(height, params.window, params.stride);
    let xs = offsets(width, params.window, params.stride);
    let count = xs.len() * ys.len();
    Ok(MaskBatch::from_source(width, height, count, 0, MaskSource::Sliding { params, xs, ys }))
}

pub(super) fn window_mask(
    width: usize,
    height: usize,
    params: &SlidingWindowParams,
    xs: &[usize],
    ys: &[usize],
    index: usize,
) -> GrayRaster {
    let x0 = xs[index % xs.len()];
    let y0 = ys[index / xs.len()];
    let mut m = GrayRaster::filled(width, height, 1.0);
    for y in y0..(y0 + params.window).min(height) {
        for x in x0..(x0 + params.window).min(width) {
            m.data[y * width + x] = 0.0;
        }
    }
    m
}
