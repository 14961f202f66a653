//! Providers that read ground truth. They stand in for learned models when
//! running on synthetic sequences, where the truth is known.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DisplacementProvider, EstimateError, GridProposal, GridSpec, SimilarityProvider};
use crate::geometry::{iou, BoundingBox, Displacement};
use crate::track::{LabeledBox, LabeledFrames, Tracklet};

/// Minimum overlap for a box to be attributed to a ground-truth object.
const IDENTITY_IOU: f64 = 0.5;
/// Looser overlap used to find which object a tracklet's anchor follows.
const ANCHOR_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyTruthConfig {
    pub grid: GridSpec,
    /// Per-draw error scale: the radial RMS error is `noise_alpha` times the
    /// object's box diagonal.
    pub noise_alpha: f64,
    /// Probability that a grid is a confident-looking miss: a wide bump at a
    /// random displacement.
    pub outlier_rate: f64,
    /// Bump width, in bins, for outliers and for tracklets that follow no
    /// ground-truth object.
    pub outlier_bandwidth_bins: f64,
    pub seed: u64,
}

impl Default for NoisyTruthConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            noise_alpha: 0.0,
            outlier_rate: 0.0,
            outlier_bandwidth_bins: 3.0,
            seed: 0,
        }
    }
}

/// Grids centred on the displacement that carries the tracklet's last box
/// onto its ground-truth object in the next frame, plus configurable noise.
///
/// The bump width equals the noise scale, so noisier draws also come out
/// less confident. Noise depends only on `(seed, frame, object id)`, so
/// every tracker configuration sees the same draw for the same object.
#[derive(Debug, Clone)]
pub struct NoisyTruthProvider {
    truth: Arc<LabeledFrames>,
    config: NoisyTruthConfig,
}

impl NoisyTruthProvider {
    pub fn new(truth: Arc<LabeledFrames>, config: NoisyTruthConfig) -> Self {
        Self { truth, config }
    }

    pub fn config(&self) -> &NoisyTruthConfig {
        &self.config
    }
}

fn best_match(boxes: &[LabeledBox], b: &BoundingBox, min_iou: f64) -> Option<LabeledBox> {
    let mut best: Option<(f64, LabeledBox)> = None;
    for lb in boxes {
        let v = iou(&lb.bbox, b);
        if v >= min_iou && best.is_none_or(|(bv, bl)| v > bv || (v == bv && lb.id < bl.id)) {
            best = Some((v, *lb));
        }
    }
    best.map(|(_, lb)| lb)
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DisplacementProvider for NoisyTruthProvider {
    fn propose(
        &self,
        tracklet: &Tracklet,
        frame: u32,
        context: &BoundingBox,
    ) -> Result<GridProposal, EstimateError> {
        let layout = self.config.grid.layout_for(context);
        let wide = (
            self.config.outlier_bandwidth_bins * layout.step_x(),
            self.config.outlier_bandwidth_bins * layout.step_y(),
        );
        let anchor = tracklet.last_box();
        let object = best_match(self.truth.at(tracklet.last_frame()), &anchor, ANCHOR_IOU)
            .and_then(|prev| {
                self.truth.at(frame).iter().find(|g| g.id == prev.id).map(|now| (prev, *now))
            });
        let Some((prev, now)) = object else {
            let confidences = layout.gaussian_bump(tracklet.speed(), wide);
            return Ok(GridProposal { layout, confidences });
        };

        let truth = anchor.center_shift_to(&now.bbox);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, frame as u64, now.id));
        let is_outlier = rng.random::<f64>() < self.config.outlier_rate;
        let sigma = self.config.noise_alpha * prev.bbox.diagonal() / std::f64::consts::SQRT_2;
        let confidences = if is_outlier {
            let (rx, ry) = layout.half_range();
            let off = Displacement::new(
                rng.random_range(-0.5..=0.5) * rx,
                rng.random_range(-0.5..=0.5) * ry,
            );
            layout.gaussian_bump(truth + off, wide)
        } else if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("finite positive sigma");
            let noisy = truth + Displacement::new(n.sample(&mut rng), n.sample(&mut rng));
            layout.gaussian_bump(noisy, (sigma, sigma))
        } else {
            layout.gaussian_bump(truth, (0.0, 0.0))
        };
        Ok(GridProposal { layout, confidences })
    }
}

/// Similarity 1 when both boxes overlap the same ground-truth object by at
/// least 0.5 IoU (each box attributed to its best-overlapping object), else 0.
#[derive(Debug, Clone)]
pub struct TruthSimilarityProvider {
    truth: Arc<LabeledFrames>,
}

impl TruthSimilarityProvider {
    pub fn new(truth: Arc<LabeledFrames>) -> Self {
        Self { truth }
    }
}

impl SimilarityProvider for TruthSimilarityProvider {
    fn similarity(&self, a: &BoundingBox, b: &BoundingBox, frame: u32) -> Result<f64, EstimateError> {
        let gt = self.truth.at(frame);
        let same = match (best_match(gt, a, IDENTITY_IOU), best_match(gt, b, IDENTITY_IOU)) {
            (Some(x), Some(y)) => x.id == y.id,
            _ => false,
        };
        Ok(if same { 1.0 } else { 0.0 })
    }
}
