use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::perturbation::check_target;
use super::similarity::{per_mask_weight, SimilarityMode};
use super::{chunked_reduce, ExplainError};
use crate::detection::Detection;
use crate::detector::Detector;
use crate::masking::rng::mask_stream;
use crate::masking::{apply_mask_with_fill, slic_segment, Fill, Segmentation, SlicParams};
use crate::raster::{GrayRaster, ImageRaster};
use crate::saliency::SaliencyMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub segments: usize,
    pub samples: usize,
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub fill: Fill,
    pub slic: SlicParams,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            segments: 100,
            samples: 1000,
            kernel_width: 0.25,
            ridge_lambda: 1.0,
            fill: Fill::Mean,
            slic: SlicParams::default(),
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        let bad = |m: String| Err(ExplainError::InvalidConfig(m));
        if self.segments < 2 {
            return bad(format!("lime needs at least 2 segments, got {}", self.segments));
        }
        if self.samples == 0 {
            return bad("lime needs at least one sample".into());
        }
        if !(self.kernel_width.is_finite() && self.kernel_width > 0.0) {
            return bad(format!("kernel_width must be positive, got {}", self.kernel_width));
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda >= 0.0) {
            return bad(format!("ridge_lambda must be non-negative, got {}", self.ridge_lambda));
        }
        Ok(())
    }
}

/// Sample weight of a binary vector with `kept` of `total` entries set:
/// `exp(-(1 - cos(z, 1))^2 / width^2)`, where `cos(z, 1) = sqrt(kept / total)`
/// and the empty vector counts as distance 1.
pub fn lime_kernel(kept: usize, total: usize, kernel_width: f64) -> f64 {
    let cos = if total == 0 { 0.0 } else { (kept as f64 / total as f64).sqrt() };
    let d = 1.0 - cos;
    (-(d * d) / (kernel_width * kernel_width)).exp()
}

/// Weighted ridge regression `y ≈ X w + b` minimising
/// `sum_i pi_i (y_i - x_i·w - b)^2 + lambda |w|^2`; the intercept is not
/// penalised. Returns `(w, b)`.
pub fn fit_weighted_ridge(
    design: &[Vec<f64>],
    responses: &[f64],
    sample_weights: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64), ExplainError> {
    if design.len() != responses.len() || design.len() != sample_weights.len() {
        return Err(ExplainError::InvalidConfig(format!(
            "design has {} rows, responses {}, weights {}",
            design.len(),
            responses.len(),
            sample_weights.len()
        )));
    }
    let p = design.first().map_or(0, Vec::len);
    if design.iter().any(|r| r.len() != p) {
        return Err(ExplainError::InvalidConfig("ragged design matrix".into()));
    }
    // unknowns: w_0..w_{p-1}, b
    let n = p + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for ((row, &y), &pi) in design.iter().zip(responses).zip(sample_weights) {
        for i in 0..n {
            let xi = if i < p { row[i] } else { 1.0 };
            if xi == 0.0 {
                continue;
            }
            for j in 0..n {
                let xj = if j < p { row[j] } else { 1.0 };
                a[i][j] += pi * xi * xj;
            }
            a[i][n] += pi * xi * y;
        }
    }
    for (i, r) in a.iter_mut().enumerate().take(p) {
        r[i] += lambda;
    }
    let x = solve_augmented(a).ok_or(ExplainError::Singular)?;
    let b = x[p];
    Ok((x[..p].to_vec(), b))
}

/// Gaussian elimination with partial pivoting on an `n x (n+1)` system.
fn solve_augmented(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let (upper, lower) = a.split_at_mut(row);
            let (src, dst) = (&upper[col], &mut lower[0]);
            let f = dst[col] / src[col];
            if f != 0.0 {
                for (d, s) in dst[col..].iter_mut().zip(&src[col..]) {
                    *d -= f * s;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    Some(x)
}

#[derive(Debug, Clone)]
pub struct LimeExplanation {
    /// Per-pixel surrogate weight of the pixel's segment.
    pub map: SaliencyMap,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub segmentation: Segmentation,
    /// One row per sample, 1.0 where the segment was kept.
    pub design: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub sample_weights: Vec<f64>,
}

pub fn explain_lime<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<SaliencyMap, ExplainError> {
    explain_lime_detailed(img, target, detector, cfg, seed).map(|e| e.map)
}

pub fn explain_lime_detailed<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<LimeExplanation, ExplainError> {
    cfg.validate()?;
    let seg = slic_segment(img, cfg.segments, cfg.slic.compactness, cfg.slic.iterations)?;
    explain_lime_with_segmentation(img, target, detector, cfg, seed, seg)
}

/// LIME over a caller-supplied segmentation; `cfg.segments` and `cfg.slic`
/// are ignored.
pub fn explain_lime_with_segmentation<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &LimeConfig,
    seed: u64,
    seg: Segmentation,
) -> Result<LimeExplanation, ExplainError> {
    let probe = LimeConfig { segments: seg.count(), ..cfg.clone() };
    probe.validate()?;
    if (seg.width(), seg.height()) != img.dims() {
        return Err(ExplainError::InvalidConfig(format!(
            "segmentation is {}x{}, image is {}x{}",
            seg.width(),
            seg.height(),
            img.width(),
            img.height()
        )));
    }
    let k = seg.count();
    if cfg.samples < k {
        warn!("lime: {} samples for {k} segments; the fit is underdetermined without ridge", cfg.samples);
    }
    check_target(img, target, detector)?;

    let design: Vec<Vec<f64>> = (0..cfg.samples)
        .map(|i| {
            let mut rng = mask_stream(seed, i as u64);
            (0..k).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    let fill = cfg.fill.values(img);
    let (w, h) = img.dims();

    let mut responses = Vec::with_capacity(cfg.samples);
    chunked_reduce(
        cfg.samples,
        detector.max_concurrency(),
        |range| {
            let mut out = Vec::with_capacity(range.len());
            for i in range {
                let z = &design[i];
                let data = seg.labels().iter().map(|&l| z[l as usize] as f32).collect();
                let mask = GrayRaster::new(w, h, data).expect("segmentation matches image");
                let perturbed = apply_mask_with_fill(img, &mask, &fill)?;
                let proposals = detector
                    .detect(&perturbed)
                    .map_err(|source| ExplainError::Detector { mask_index: i, source })?;
                out.push(per_mask_weight(target, &proposals, SimilarityMode::Adapted)?);
            }
            Ok(out)
        },
        |chunk| responses.extend(chunk),
    )?;

    let sample_weights: Vec<f64> = design
        .iter()
        .map(|z| lime_kernel(z.iter().filter(|&&v| v > 0.0).count(), k, cfg.kernel_width))
        .collect();
    let (weights, intercept) = fit_weighted_ridge(&design, &responses, &sample_weights, cfg.ridge_lambda)?;
    let values = seg.labels().iter().map(|&l| weights[l as usize]).collect();
    let map = SaliencyMap::new(w, h, values, target.clone(), "lime")?;
    Ok(LimeExplanation {
        map,
        weights,
        intercept,
        segmentation: seg,
        design,
        responses,
        sample_weights,
    })
}
