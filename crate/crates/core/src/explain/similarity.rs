use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::detection::{cosine_similarity, Detection};
use crate::geometry::iou;

/// How a proposal is compared with the target detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// `IoU * cosine(class probs) * objectness`; needs class probability vectors.
    Full,
    /// `IoU * objectness`, for detectors that only report their top class.
    Adapted,
}

pub fn similarity_score(target: &Detection, proposal: &Detection, mode: SimilarityMode) -> Result<f64, ExplainError> {
    let loc = iou(&target.bbox, &proposal.bbox);
    match mode {
        SimilarityMode::Adapted => Ok(loc * proposal.objectness()),
        SimilarityMode::Full => {
            let (Some(pt), Some(pj)) = (target.class_probs(), proposal.class_probs()) else {
                return Err(ExplainError::FullSimilarityUnavailable);
            };
            let cls = cosine_similarity(pt, pj)?.max(0.0);
            Ok(loc * cls * proposal.objectness())
        }
    }
}

/// Best similarity over all proposals of one masked image, 0 when there are none.
pub fn per_mask_weight(target: &Detection, proposals: &[Detection], mode: SimilarityMode) -> Result<f64, ExplainError> {
    proposals
        .iter()
        .try_fold(0.0f64, |best, p| Ok(best.max(similarity_score(target, p, mode)?)))
}

/// Classification-only score: highest objectness among proposals of the
/// target's class, wherever they are.
pub fn class_score(target: &Detection, proposals: &[Detection]) -> f64 {
    proposals
        .iter()
        .filter(|p| p.class_id() == target.class_id())
        .map(Detection::objectness)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use proptest::prelude::*;

    fn det(b: [f64; 4], o: f64) -> Detection {
        Detection::reduced(BBox::try_from(b).unwrap(), o, 0).unwrap()
    }

    #[test]
    fn adapted_examples() {
        let t = det([0., 0., 4., 4.], 1.0);
        assert!((similarity_score(&t, &det([0., 0., 4., 4.], 0.8), SimilarityMode::Adapted).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(similarity_score(&t, &det([5., 5., 6., 6.], 0.9), SimilarityMode::Adapted).unwrap(), 0.0);
    }

    #[test]
    fn full_example() {
        let b = BBox::new(0., 0., 2., 2.).unwrap();
        let t = Detection::with_class_probs(b, 1.0, vec![1.0, 0.0]).unwrap();
        let p = Detection::with_label_and_probs(b, 0.5, 1, vec![0.6, 0.8]).unwrap();
        // 1 * 0.6 * 0.5
        let s = similarity_score(&t, &p, SimilarityMode::Full).unwrap();
        assert!((s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn full_without_probs_errors() {
        let t = det([0., 0., 1., 1.], 1.0);
        assert!(matches!(
            similarity_score(&t, &t, SimilarityMode::Full),
            Err(ExplainError::FullSimilarityUnavailable)
        ));
    }

    #[test]
    fn weight_is_max_over_proposals() {
        let t = det([0., 0., 4., 4.], 1.0);
        assert_eq!(per_mask_weight(&t, &[], SimilarityMode::Adapted).unwrap(), 0.0);
        assert_eq!(per_mask_weight(&t, &[t.clone()], SimilarityMode::Adapted).unwrap(), 1.0);
        let props = [det([0., 0., 4., 4.], 0.2), det([0., 0., 4., 4.], 0.7), det([0., 0., 4., 4.], 0.4)];
        assert!((per_mask_weight(&t, &props, SimilarityMode::Adapted).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn class_score_ignores_location() {
        let t = det([0., 0., 4., 4.], 1.0);
        let far = det([10., 10., 12., 12.], 0.6);
        let other = Detection::reduced(BBox::new(0., 0., 4., 4.).unwrap(), 0.9, 1).unwrap();
        assert_eq!(class_score(&t, &[far, other]), 0.6);
    }

    fn arb_det() -> impl Strategy<Value = Detection> {
        (0.0..20.0f64, 0.0..20.0f64, 0.5..10.0f64, 0.5..10.0f64, 0.0..=1.0f64)
            .prop_map(|(x, y, w, h, o)| det([x, y, x + w, y + h], o))
    }

    proptest! {
        #[test]
        fn objectness_scaling_scales_weight(
            t in arb_det(), props in prop::collection::vec(arb_det(), 0..6), c in 0.01..=1.0f64,
        ) {
            let w = per_mask_weight(&t, &props, SimilarityMode::Adapted).unwrap();
            let scaled: Vec<Detection> = props.iter().map(|p| p.scaled(c)).collect();
            let ws = per_mask_weight(&t, &scaled, SimilarityMode::Adapted).unwrap();
            prop_assert!((ws - c * w).abs() < 1e-12);
        }

        #[test]
        fn adding_a_proposal_never_lowers_weight(
            t in arb_det(), props in prop::collection::vec(arb_det(), 0..6), extra in arb_det(),
        ) {
            let w = per_mask_weight(&t, &props, SimilarityMode::Adapted).unwrap();
            let mut more = props.clone();
            more.push(extra);
            prop_assert!(per_mask_weight(&t, &more, SimilarityMode::Adapted).unwrap() >= w);
        }
    }
}
