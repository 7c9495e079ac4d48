use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::mask_stream;
use super::{check_keep_prob, MaskBatch, MaskError, MaskSource};
use crate::raster::{corner_scale, GrayRaster};

/// Random binary `grid_h x grid_w` grids, each cell kept with `keep_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiseParams {
    pub grid_h: usize,
    pub grid_w: usize,
    pub keep_prob: f64,
}

impl Default for RiseParams {
    fn default() -> Self {
        Self {
            grid_h: 16,
            grid_w: 16,
            keep_prob: 0.25,
        }
    }
}

impl RiseParams {
    pub fn validate(&self, height: usize, width: usize) -> Result<(), MaskError> {
        check_keep_prob(self.keep_prob)?;
        if self.grid_h == 0 || self.grid_w == 0 || self.grid_h > height || self.grid_w > width {
            return Err(MaskError::GridTooFine {
                grid_h: self.grid_h,
                grid_w: self.grid_w,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Cell size `(floor(H / h), floor(W / w))`.
    pub fn cell_size(&self, height: usize, width: usize) -> (usize, usize) {
        (height / self.grid_h, width / self.grid_w)
    }
}

pub fn gen_rise_masks(
    height: usize,
    width: usize,
    params: RiseParams,
    count: usize,
    seed: u64,
) -> Result<MaskBatch, MaskError> {
    params.validate(height, width)?;
    if count == 0 {
        return Err(MaskError::EmptyBatch);
    }
    Ok(MaskBatch::from_source(width, height, count, seed, MaskSource::Rise(params)))
}

/// Binary grid and crop offset `(dy, dx)` drawn for mask `index`.
pub(super) fn draw_grid(params: &RiseParams, height: usize, width: usize, seed: u64, index: usize) -> (GrayRaster, usize, usize) {
    let mut rng = mask_stream(seed, index as u64);
    let cells = (0..params.grid_h * params.grid_w)
        .map(|_| if rng.random::<f64>() < params.keep_prob { 1.0 } else { 0.0 })
        .collect();
    let (ch, cw) = params.cell_size(height, width);
    let dy = rng.random_range(0..ch);
    let dx = rng.random_range(0..cw);
    (GrayRaster { width: params.grid_w, height: params.grid_h, data: cells }, dy, dx)
}

/// The grid is bilinearly upsampled to `((h+1) C_H) x ((w+1) C_W)` and an
/// `H x W` window at `(dy, dx)` is cut out. Only the window is evaluated.
pub(super) fn rise_mask(width: usize, height: usize, params: &RiseParams, seed: u64, index: usize) -> GrayRaster {
    let (grid, dy, dx) = draw_grid(params, height, width, seed, index);
    let (ch, cw) = params.cell_size(height, width);
    let up_h = (params.grid_h + 1) * ch;
    let up_w = (params.grid_w + 1) * cw;
    let ky = corner_scale(grid.height, up_h);
    let kx = corner_scale(grid.width, up_w);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let sy = (y + dy) as f64 * ky;
        for x in 0..width {
            data.push(grid.sample_bilinear((x + dx) as f64 * kx, sy));
        }
    }
    GrayRaster { width, height, data }
}
