//! Matching predicted tracklet boxes to detections.

mod hungarian;

pub use hungarian::{hungarian, matching_score, SimilarityMatrix};

use crate::estimators::{visual_similarity, EstimateError, SimilarityProvider};
use crate::geometry::{iou, BoundingBox};
use crate::track::Detection;

/// `v + λ·iou`.
pub fn overall_similarity(v: f64, iou_val: f64, lambda: f64) -> f64 {
    v + lambda * iou_val
}

/// Thresholds for the commit tiers and the pre-assignment gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    pub lambda: f64,
    /// At or above: the detection box is committed as is.
    pub commit_iou: f64,
    /// At or above (and below `commit_iou`): the mean of detection and
    /// prediction is committed. Below: the match is discarded.
    pub average_iou: f64,
    /// Pairs with zero overlap and visual similarity under this value are
    /// never offered to the assignment.
    pub gate_visual: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self { lambda: 1.0, commit_iou: 0.5, average_iou: 0.3, gate_visual: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitAction {
    Detection,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub tracklet_id: u64,
    pub detection: usize,
    pub iou: f64,
    pub action: CommitAction,
    pub committed: BoundingBox,
}

/// Result of one frame's assignment. Matches are ordered by tracklet id,
/// the unmatched sets ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameAssociation {
    pub matches: Vec<Match>,
    pub unmatched_tracklets: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

/// Builds the gated overall-similarity matrix between predictions (rows)
/// and detections (columns).
pub fn build_similarity_matrix(
    predictions: &[(u64, BoundingBox)],
    detections: &[Detection],
    similarity: &dyn SimilarityProvider,
    frame: u32,
    config: &AssociationConfig,
) -> Result<SimilarityMatrix, EstimateError> {
    let mut m = SimilarityMatrix::new(predictions.len(), detections.len());
    for (i, (_, pred)) in predictions.iter().enumerate() {
        for (j, det) in detections.iter().enumerate() {
            let v = visual_similarity(similarity, pred, &det.bbox, frame)?;
            let o = iou(pred, &det.bbox);
            m.set(i, j, overall_similarity(v, o, config.lambda));
            if o == 0.0 && v < config.gate_visual {
                m.mask(i, j);
            }
        }
    }
    Ok(m)
}

/// One Hungarian round followed by the IoU commit tiers. A detection whose
/// match falls below `average_iou` goes back to the unmatched pool; it is
/// not offered to any other tracklet this frame.
pub fn associate_frame(
    predictions: &[(u64, BoundingBox)],
    detections: &[Detection],
    similarity: &dyn SimilarityProvider,
    frame: u32,
    config: &AssociationConfig,
) -> Result<FrameAssociation, EstimateError> {
    let mut rows: Vec<(u64, BoundingBox)> = predictions.to_vec();
    rows.sort_by_key(|r| r.0);
    let m = build_similarity_matrix(&rows, detections, similarity, frame, config)?;
    let pairs = hungarian(&m);

    let mut row_taken = vec![false; rows.len()];
    let mut det_taken = vec![false; detections.len()];
    let mut matches = Vec::new();
    for (i, j) in pairs {
        let (id, pred) = rows[i];
        let det = detections[j].bbox;
        let o = iou(&pred, &det);
        let (action, committed) = if o >= config.commit_iou {
            (CommitAction::Detection, det)
        } else if o >= config.average_iou {
            (CommitAction::Averaged, pred.average(&det))
        } else {
            continue;
        };
        row_taken[i] = true;
        det_taken[j] = true;
        matches.push(Match { tracklet_id: id, detection: j, iou: o, action, committed });
    }
    Ok(FrameAssociation {
        matches,
        unmatched_tracklets: rows
            .iter()
            .zip(&row_taken)
            .filter(|(_, &t)| !t)
            .map(|(r, _)| r.0)
            .collect(),
        unmatched_detections: (0..detections.len()).filter(|&j| !det_taken[j]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::IdentityOverlapProvider;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn det(b: BoundingBox) -> Detection {
        Detection { frame: 1, bbox: b, score: 1.0 }
    }

    struct Const(f64);
    impl SimilarityProvider for Const {
        fn similarity(&self, _: &BoundingBox, _: &BoundingBox, _: u32) -> Result<f64, EstimateError> {
            Ok(self.0)
        }
    }

    #[test]
    fn overall_similarity_examples() {
        assert_eq!(overall_similarity(0.0, 0.0, 3.0), 0.0);
        assert_eq!(overall_similarity(1.0, 1.0, 1.0), 2.0);
        assert!((overall_similarity(0.6, 0.4, 0.5) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn exact_prediction_commits_detection() {
        let b = bb(5.0, 5.0, 10.0, 20.0);
        let a = associate_frame(&[(7, b)], &[det(b)], &Const(0.5), 1, &AssociationConfig::default())
            .unwrap();
        assert_eq!(a.matches.len(), 1);
        assert_eq!(a.matches[0].iou, 1.0);
        assert_eq!(a.matches[0].action, CommitAction::Detection);
        assert_eq!(a.matches[0].committed, b);
        assert!(a.unmatched_tracklets.is_empty() && a.unmatched_detections.is_empty());
    }

    #[test]
    fn middle_tier_commits_average() {
        // overlap 8·10 = 80, union 120 → 2/3; shift further for 0.4
        let pred = bb(0.0, 0.0, 10.0, 10.0);
        let d = bb(2.0, 0.0, 10.0, 10.0);
        let cfg = AssociationConfig { commit_iou: 0.7, ..Default::default() };
        let a = associate_frame(&[(1, pred)], &[det(d)], &Const(0.5), 1, &cfg).unwrap();
        assert_eq!(a.matches[0].action, CommitAction::Averaged);
        assert_eq!(a.matches[0].committed, bb(1.0, 0.0, 10.0, 10.0));

        // shift 4.2857…: overlap 57.14, union 142.86 → 0.4
        let d = bb(30.0 / 7.0, 0.0, 10.0, 10.0);
        let a = associate_frame(&[(1, pred)], &[det(d)], &Const(0.5), 1, &AssociationConfig::default())
            .unwrap();
        assert!((a.matches[0].iou - 0.4).abs() < 1e-12);
        assert_eq!(a.matches[0].action, CommitAction::Averaged);
        assert_eq!(a.matches[0].committed, pred.average(&d));
    }

    #[test]
    fn low_overlap_returns_detection_to_pool() {
        let pred = bb(0.0, 0.0, 10.0, 10.0);
        let d = bb(6.0, 0.0, 10.0, 10.0); // 40 / 160 = 0.25
        let a = associate_frame(&[(3, pred)], &[det(d)], &Const(0.9), 1, &AssociationConfig::default())
            .unwrap();
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracklets, vec![3]);
        assert_eq!(a.unmatched_detections, vec![0]);
    }

    #[test]
    fn gate_masks_disjoint_dissimilar_pairs() {
        let pred = bb(0.0, 0.0, 10.0, 10.0);
        let far = bb(100.0, 0.0, 10.0, 10.0);
        let m = build_similarity_matrix(&[(1, pred)], &[det(far)], &Const(0.05), 1, &AssociationConfig::default())
            .unwrap();
        assert!(!m.is_valid(0, 0));
        let m = build_similarity_matrix(&[(1, pred)], &[det(far)], &Const(0.2), 1, &AssociationConfig::default())
            .unwrap();
        assert!(m.is_valid(0, 0));
    }

    #[test]
    fn rows_are_ordered_by_tracklet_id() {
        let b1 = bb(0.0, 0.0, 10.0, 10.0);
        let b2 = bb(50.0, 0.0, 10.0, 10.0);
        let a = associate_frame(
            &[(9, b2), (2, b1)],
            &[det(b2), det(b1)],
            &IdentityOverlapProvider,
            1,
            &AssociationConfig::default(),
        )
        .unwrap();
        let got: Vec<_> = a.matches.iter().map(|m| (m.tracklet_id, m.detection)).collect();
        assert_eq!(got, vec![(2, 1), (9, 0)]);
    }

    fn arb_scene() -> impl Strategy<Value = (Vec<(u64, BoundingBox)>, Vec<Detection>)> {
        let b = (0.0..60.0f64, 0.0..60.0f64, 5.0..25.0f64, 5.0..25.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap());
        (prop::collection::vec(b.clone(), 0..6), prop::collection::vec(b, 0..6)).prop_map(|(p, d)| {
            (
                p.into_iter().enumerate().map(|(i, b)| (i as u64 + 1, b)).collect(),
                d.into_iter().map(det).collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn one_to_one_and_monotone((preds, dets) in arb_scene(), lo in 0.0..0.9f64, bump in 0.0..0.5f64) {
            let cfg = AssociationConfig { average_iou: lo, commit_iou: lo.max(0.5), ..Default::default() };
            let a = associate_frame(&preds, &dets, &IdentityOverlapProvider, 1, &cfg).unwrap();
            let mut ids: Vec<_> = a.matches.iter().map(|m| m.tracklet_id).collect();
            let mut js: Vec<_> = a.matches.iter().map(|m| m.detection).collect();
            ids.dedup();
            js.sort_unstable();
            js.dedup();
            prop_assert_eq!(ids.len(), a.matches.len());
            prop_assert_eq!(js.len(), a.matches.len());
            prop_assert_eq!(a.matches.len() + a.unmatched_tracklets.len(), preds.len());
            prop_assert_eq!(a.matches.len() + a.unmatched_detections.len(), dets.len());

            let raised = AssociationConfig { average_iou: lo + bump, commit_iou: (lo + bump).max(0.5), ..cfg };
            let b = associate_frame(&preds, &dets, &IdentityOverlapProvider, 1, &raised).unwrap();
            prop_assert!(b.matches.len() <= a.matches.len());
        }
    }
}
