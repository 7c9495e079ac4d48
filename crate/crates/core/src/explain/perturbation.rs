use log::warn;
use serde::{Deserialize, Serialize};

use super::accumulate::{Normalization, SaliencyAccumulator};
use super::lime::{explain_lime, LimeConfig};
use super::similarity::{class_score, per_mask_weight, SimilarityMode};
use super::{chunked_reduce, ExplainError};
use crate::detection::Detection;
use crate::detector::Detector;
use crate::geometry::iou;
use crate::masking::{
    apply_mask_with_fill, gen_mfpp_masks, gen_rise_masks, gen_sliding_window_masks, Fill, MaskBatch, MfppParams,
    RiseParams, SlidingWindowParams,
};
use crate::raster::ImageRaster;
use crate::saliency::SaliencyMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// RISE masks weighted by the class-only score.
    Rise,
    /// RISE masks weighted by detection similarity.
    Drise,
    /// MFPP fragment masks weighted by detection similarity.
    Dmfpp,
    /// Sliding-window occlusion weighted by detection similarity.
    Dsliding,
    /// Linear surrogate over superpixels.
    Lime,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Rise, Method::Drise, Method::Dmfpp, Method::Dsliding, Method::Lime];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rise => "rise",
            Method::Drise => "drise",
            Method::Dmfpp => "dmfpp",
            Method::Dsliding => "dsliding",
            Method::Lime => "lime",
        }
    }

    /// Tag stored on produced saliency maps.
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Rise => "rise",
            Method::Drise => "d-rise",
            Method::Dmfpp => "d-mfpp",
            Method::Dsliding => "d-sliding-window",
            Method::Lime => "lime",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(Method::name).collect();
            ExplainError::InvalidConfig(format!("unknown method {s:?}; valid methods: {}", names.join(", ")))
        })
    }
}

/// Similarity choice; `auto` uses the full score when the detector and
/// target carry class probability vectors and the adapted one otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySetting {
    #[default]
    Auto,
    Full,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub method: Method,
    /// Number of random masks (ignored by `dsliding`, which enumerates windows).
    pub masks: usize,
    pub seed: u64,
    pub similarity: SimilaritySetting,
    pub normalization: Normalization,
    pub fill: Fill,
    pub rise: RiseParams,
    pub sliding: SlidingWindowParams,
    pub mfpp: MfppParams,
    pub lime: LimeConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            method: Method::Drise,
            masks: 5000,
            seed: 0,
            similarity: SimilaritySetting::Auto,
            normalization: Normalization::MaskSum,
            fill: Fill::Black,
            rise: RiseParams::default(),
            sliding: SlidingWindowParams::default(),
            mfpp: MfppParams::default(),
            lime: LimeConfig::default(),
        }
    }
}

impl ExplainConfig {
    pub fn resolve_similarity(&self, detector_has_probs: bool, target: &Detection) -> Result<SimilarityMode, ExplainError> {
        let full_ok = detector_has_probs && target.class_probs().is_some();
        match self.similarity {
            SimilaritySetting::Auto if full_ok => Ok(SimilarityMode::Full),
            SimilaritySetting::Auto | SimilaritySetting::Adapted => Ok(SimilarityMode::Adapted),
            SimilaritySetting::Full if full_ok => Ok(SimilarityMode::Full),
            SimilaritySetting::Full => Err(ExplainError::FullSimilarityUnavailable),
        }
    }

    /// Mask batch for a perturbation method.
    pub fn mask_batch(&self, img: &ImageRaster) -> Result<MaskBatch, ExplainError> {
        let (w, h) = img.dims();
        Ok(match self.method {
            Method::Rise | Method::Drise => gen_rise_masks(h, w, self.rise, self.masks, self.seed)?,
            Method::Dmfpp => gen_mfpp_masks(img, self.mfpp.clone(), self.masks, self.seed)?,
            Method::Dsliding => gen_sliding_window_masks(h, w, self.sliding)?,
            Method::Lime => {
                return Err(ExplainError::InvalidConfig("lime does not use a mask batch".into()));
            }
        })
    }
}

/// Best IoU between `target` and a same-class detection on the unperturbed
/// image; logs a warning below 0.9.
pub fn check_target<D: Detector + ?Sized>(img: &ImageRaster, target: &Detection, detector: &D) -> Result<f64, ExplainError> {
    let dets = detector.detect(img).map_err(ExplainError::Reference)?;
    let best = dets
        .iter()
        .filter(|d| d.class_id() == target.class_id())
        .map(|d| iou(&d.bbox, &target.bbox))
        .fold(0.0, f64::max);
    if best < 0.9 {
        warn!(
            "target {:?} (class {}) is not reproduced by the detector on the unperturbed image (best IoU {best:.3})",
            target.bbox,
            target.class_id()
        );
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct PerturbationExplanation {
    pub map: SaliencyMap,
    /// Weight assigned to each mask, in mask order.
    pub weights: Vec<f64>,
}

/// Saliency with any method, LIME included.
pub fn explain<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &ExplainConfig,
) -> Result<SaliencyMap, ExplainError> {
    match cfg.method {
        Method::Lime => explain_lime(img, target, detector, &cfg.lime, cfg.seed),
        _ => explain_perturbation(img, target, detector, cfg),
    }
}

pub fn explain_perturbation<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &ExplainConfig,
) -> Result<SaliencyMap, ExplainError> {
    explain_perturbation_detailed(img, target, detector, cfg).map(|e| e.map)
}

pub fn explain_perturbation_detailed<D: Detector + ?Sized>(
    img: &ImageRaster,
    target: &Detection,
    detector: &D,
    cfg: &ExplainConfig,
) -> Result<PerturbationExplanation, ExplainError> {
    if cfg.method == Method::Lime {
        return Err(ExplainError::InvalidConfig("use explain_lime for the lime method".into()));
    }
    check_target(img, target, detector)?;
    let mode = cfg.resolve_similarity(detector.capabilities().has_class_probs, target)?;
    let batch = cfg.mask_batch(img)?;
    let fill = cfg.fill.values(img);
    let (w, h) = img.dims();

    let weigh = |proposals: &[Detection]| -> Result<f64, ExplainError> {
        match cfg.method {
            Method::Rise => Ok(class_score(target, proposals)),
            _ => per_mask_weight(target, proposals, mode),
        }
    };

    let mut total = SaliencyAccumulator::new(w, h);
    let mut weights = Vec::with_capacity(batch.len());
    chunked_reduce(
        batch.len(),
        detector.max_concurrency(),
        |range| {
            let mut acc = SaliencyAccumulator::new(w, h);
            let mut ws = Vec::with_capacity(range.len());
            for i in range {
                let mask = batch.mask(i);
                let masked = apply_mask_with_fill(img, &mask, &fill)?;
                let proposals = detector
                    .detect(&masked)
                    .map_err(|source| ExplainError::Detector { mask_index: i, source })?;
                let weight = weigh(&proposals)?;
                acc.add(&mask, weight)?;
                ws.push(weight);
            }
            Ok((acc, ws))
        },
        |(acc, ws)| {
            total.merge(&acc);
            weights.extend(ws);
        },
    )?;

    let map = SaliencyMap::new(w, h, total.finish(cfg.normalization), target.clone(), cfg.method.tag())?;
    Ok(PerturbationExplanation { map, weights })
}
