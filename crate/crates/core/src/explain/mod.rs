//! Saliency for one target detection from perturbation responses.
//!
//! Every method follows the same loop: perturb the image with mask `i`, run
//! the detector, turn the proposals into a scalar weight, and fold the
//! `(mask, weight)` pair into a per-pixel weighted average. The methods differ
//! in the masks (RISE grids, MFPP fragments, sliding windows) and in how
//! proposals become a weight (localisation-aware similarity, or the
//! class-only score plain RISE uses). LIME instead fits a linear surrogate
//! over superpixel on/off vectors.

mod accumulate;
mod lime;
mod perturbation;
mod similarity;

use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::detection::DetectionError;
use crate::detector::DetectorError;
use crate::masking::MaskError;
use crate::saliency::SaliencyError;

pub use accumulate::{accumulate_saliency, Normalization, SaliencyAccumulator};
pub use lime::{
    explain_lime, explain_lime_detailed, explain_lime_with_segmentation, fit_weighted_ridge, lime_kernel, LimeConfig,
    LimeExplanation,
};
pub use perturbation::{
    check_target, explain, explain_perturbation, explain_perturbation_detailed, ExplainConfig, Method,
    PerturbationExplanation, SimilaritySetting,
};
pub use similarity::{class_score, per_mask_weight, similarity_score, SimilarityMode};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("detector failed on mask {mask_index}: {source}")]
    Detector { mask_index: usize, source: DetectorError },
    #[error("detector failed on the unperturbed image: {0}")]
    Reference(DetectorError),
    #[error("full similarity needs class probability vectors on the target and every proposal")]
    FullSimilarityUnavailable,
    #[error(transparent)]
    Similarity(#[from] DetectionError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
    #[error("{weights} weights for {masks} masks")]
    LengthMismatch { weights: usize, masks: usize },
    #[error("singular normal equations; use a positive ridge_lambda")]
    Singular,
    #[error("invalid explain configuration: {0}")]
    InvalidConfig(String),
}

const CHUNK: usize = 32;

/// Run `work` over fixed chunks of `0..count` in parallel and hand the results
/// to `merge` in chunk order. Chunk boundaries do not depend on the thread
/// count, so any order-sensitive reduction in `merge` is reproducible.
pub(crate) fn chunked_reduce<T, F, M>(
    count: usize,
    concurrency: Option<usize>,
    work: F,
    mut merge: M,
) -> Result<(), ExplainError>
where
    T: Send,
    F: Fn(Range<usize>) -> Result<T, ExplainError> + Sync,
    M: FnMut(T),
{
    let chunks: Vec<Range<usize>> = (0..count)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(count))
        .collect();
    let pool = match concurrency {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| ExplainError::InvalidConfig(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let threads = pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads());
    for wave in chunks.chunks(threads.max(1)) {
        let run = || wave.par_iter().map(|r| work(r.clone())).collect::<Vec<_>>();
        let results = match &pool {
            Some(p) => p.install(run),
            None => run(),
        };
        for r in results {
            merge(r?);
        }
    }
    Ok(())
}
