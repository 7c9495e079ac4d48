use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::detection::Detection;
use crate::detector::Detector;
use crate::geometry::{iou, BBox};
use crate::masking::Fill;
use crate::raster::ImageRaster;
use crate::saliency::SaliencyMap;

/// Step count, fill and IoU threshold shared by every target of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeletionSettings {
    pub steps: usize,
    pub fill: Fill,
    pub gamma: f64,
}

impl Default for DeletionSettings {
    fn default() -> Self {
        Self {
            steps: 100,
            fill: Fill::Black,
            gamma: 0.5,
        }
    }
}

impl DeletionSettings {
    pub fn for_target(&self, target: &Detection) -> DeletionConfig {
        DeletionConfig {
            steps: self.steps,
            fill: self.fill,
            gamma: self.gamma,
            target_class: target.class_id(),
            target_box: target.bbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionConfig {
    pub steps: usize,
    pub fill: Fill,
    pub gamma: f64,
    pub target_class: usize,
    pub target_box: BBox,
}

impl DeletionConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.steps == 0 {
            return Err(MetricsError::InvalidConfig("steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(MetricsError::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        Ok(())
    }

    /// Whether `proposal` still counts as the target under `variant`.
    pub fn qualifies(&self, proposal: &Detection, variant: Variant) -> bool {
        proposal.class_id() == self.target_class
            && match variant {
                Variant::Plain => true,
                Variant::D => iou(&self.target_box, &proposal.bbox) > self.gamma,
            }
    }

    pub fn score(&self, proposals: &[Detection], variant: Variant) -> f64 {
        proposals
            .iter()
            .filter(|p| self.qualifies(p, variant))
            .map(Detection::objectness)
            .fold(0.0, f64::max)
    }
}

/// `Plain` only asks for the target class; `D` also needs IoU above gamma
/// with the target box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionCurve {
    pub scores: Vec<f64>,
    /// Fraction of pixels removed at each step; ends at 1.0.
    pub fractions: Vec<f64>,
    pub auc: f64,
}

/// Both variants' curves and min-subsets from one pass over the steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionEvaluation {
    pub plain: DeletionCurve,
    pub d: DeletionCurve,
    pub min_subset_pct: f64,
    pub d_min_subset_pct: f64,
}

impl DeletionEvaluation {
    pub fn curve(&self, variant: Variant) -> &DeletionCurve {
        match variant {
            Variant::Plain => &self.plain,
            Variant::D => &self.d,
        }
    }

    pub fn min_subset(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Plain => self.min_subset_pct,
            Variant::D => self.d_min_subset_pct,
        }
    }
}

/// Rectangle-rule area: the mean of the scores.
pub fn auc(scores: &[f64]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyCurve);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Pixel indices by descending saliency, ties in row-major order.
pub fn deletion_order(map: &SaliencyMap) -> Vec<usize> {
    let v = map.values();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

/// Pixels removed after step `k` of `steps`: `ceil(k * n / steps)`.
pub fn removed_after(k: usize, n: usize, steps: usize) -> usize {
    (k * n).div_ceil(steps)
}

pub fn deletion_curve<D: Detector + ?Sized>(
    img: &ImageRaster,
    map: &SaliencyMap,
    detector: &D,
    cfg: &DeletionConfig,
    variant: Variant,
) -> Result<DeletionCurve, MetricsError> {
    evaluate_deletion(img, map, detector, cfg).map(|e| e.curve(variant).clone())
}

/// Percentage of pixels removed at the first step where no proposal
/// qualifies (with objectness at or above the detector's confidence
/// threshold); 100 when that never happens.
pub fn min_subset<D: Detector + ?Sized>(
    img: &ImageRaster,
    map: &SaliencyMap,
    detector: &D,
    cfg: &DeletionConfig,
    variant: Variant,
) -> Result<f64, MetricsError> {
    evaluate_deletion(img, map, detector, cfg).map(|e| e.min_subset(variant))
}

pub fn evaluate_deletion<D: Detector + ?Sized>(
    img: &ImageRaster,
    map: &SaliencyMap,
    detector: &D,
    cfg: &DeletionConfig,
) -> Result<DeletionEvaluation, MetricsError> {
    cfg.validate()?;
    if map.dims() != img.dims() {
        return Err(MetricsError::DimensionMismatch {
            map: map.dims(),
            image: img.dims(),
        });
    }
    let threshold = detector.capabilities().confidence_threshold;
    let n = img.width() * img.height();
    let c = img.channels();
    let order = deletion_order(map);
    let fill = cfg.fill.values(img);
    let mut data = img.data().to_vec();

    let k_steps = cfg.steps;
    let mut plain = Vec::with_capacity(k_steps);
    let mut d = Vec::with_capacity(k_steps);
    let mut fractions = Vec::with_capacity(k_steps);
    let mut gone = [None::<usize>, None::<usize>];
    let mut removed = 0;
    for k in 1..=k_steps {
        let upto = removed_after(k, n, k_steps);
        for &p in &order[removed..upto] {
            data[p * c..(p + 1) * c].copy_from_slice(&fill);
        }
        removed = upto;
        let step_img = ImageRaster::from_parts_unchecked(img.width(), img.height(), c, data.clone());
        let proposals = detector.detect(&step_img).map_err(|source| MetricsError::Detector {
            step: k,
            source,
            partial_plain: plain.clone(),
            partial_d: d.clone(),
        })?;
        plain.push(cfg.score(&proposals, Variant::Plain));
        d.push(cfg.score(&proposals, Variant::D));
        fractions.push(removed as f64 / n as f64);
        for (slot, variant) in gone.iter_mut().zip([Variant::Plain, Variant::D]) {
            if slot.is_none() && !proposals.iter().any(|p| p.objectness() >= threshold && cfg.qualifies(p, variant)) {
                *slot = Some(removed);
            }
        }
    }
    let pct = |g: Option<usize>| g.map_or(100.0, |r| 100.0 * r as f64 / n as f64);
    Ok(DeletionEvaluation {
        plain: DeletionCurve {
            auc: auc(&plain)?,
            scores: plain,
            fractions: fractions.clone(),
        },
        d: DeletionCurve {
            auc: auc(&d)?,
            scores: d,
            fractions,
        },
        min_subset_pct: pct(gone[0]),
        d_min_subset_pct: pct(gone[1]),
    })
}
