//! Displacement and similarity providers.
//!
//! The tracker asks two questions of the outside world: how far did this
//! object move since the last frame (a confidence grid over displacement
//! bins), and how alike are two boxes. Both are traits so a learned model,
//! a precomputed file, or an analytic stand-in can answer them.

mod grid;
mod oracle;
mod truth;

use thiserror::Error;

use crate::geometry::{iou, BoundingBox};
use crate::track::Tracklet;

pub use grid::{
    unary_confidence_weight, weighted_mean_displacement, DisplacementEvidence, DisplacementGrid,
    GridLayout, GridSpec, RENORMALIZE_TOLERANCE, SUM_TOLERANCE, WEIGHT_MARGIN,
};
pub use oracle::{FileDisplacementOracle, FileSimilarityOracle, OracleLoadError};
pub use truth::{NoisyTruthConfig, NoisyTruthProvider, TruthSimilarityProvider};
pub(crate) use truth::mix_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("grid has {got} bins, layout expects {expected}")]
    BinCount { expected: usize, got: usize },
    #[error("confidence {0} is negative or not finite")]
    InvalidConfidence(f64),
    #[error("confidences sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("no displacement grid for sequence {sequence:?} frame {frame} anchor {anchor}")]
    MissingGrid { sequence: String, frame: u32, anchor: BoundingBox },
    #[error("no similarity score for sequence {sequence:?} frame {frame} boxes {a} / {b}")]
    MissingSimilarity { sequence: String, frame: u32, a: BoundingBox, b: BoundingBox },
    #[error("similarity {0} is outside [0, 1]")]
    InvalidSimilarity(f64),
}

/// Raw provider output: a layout and unnormalised-or-normalised confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProposal {
    pub layout: GridLayout,
    pub confidences: Vec<f64>,
}

/// Stand-in for a learned visual-displacement estimator.
///
/// `context` is the enlarged window around the tracklet's last box; `frame`
/// is the frame the displacement leads into.
pub trait DisplacementProvider: Send + Sync {
    fn propose(
        &self,
        tracklet: &Tracklet,
        frame: u32,
        context: &BoundingBox,
    ) -> Result<GridProposal, EstimateError>;
}

/// Stand-in for a learned same-object classifier. Scores lie in `[0, 1]`.
pub trait SimilarityProvider: Send + Sync {
    fn similarity(&self, a: &BoundingBox, b: &BoundingBox, frame: u32) -> Result<f64, EstimateError>;
}

/// Queries a provider and validates its grid.
pub fn estimate_displacement(
    provider: &dyn DisplacementProvider,
    tracklet: &Tracklet,
    frame: u32,
    context: &BoundingBox,
) -> Result<DisplacementEvidence, EstimateError> {
    let GridProposal { layout, confidences } = provider.propose(tracklet, frame, context)?;
    Ok(DisplacementEvidence::from_grid(DisplacementGrid::new(layout, confidences)?))
}

pub fn visual_similarity(
    provider: &dyn SimilarityProvider,
    a: &BoundingBox,
    b: &BoundingBox,
    frame: u32,
) -> Result<f64, EstimateError> {
    let v = provider.similarity(a, b, frame)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(EstimateError::InvalidSimilarity(v));
    }
    Ok(v)
}

/// Gaussian bump centred on the tracklet's current speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantVelocityProvider {
    pub grid: GridSpec,
    /// Bump width in bins, per axis. Zero gives a point mass.
    pub bandwidth_bins: f64,
    /// When set and lower than the bump's natural peak, the bump is mixed
    /// with a uniform floor until its largest bin has this confidence.
    pub peak_confidence: Option<f64>,
}

impl Default for ConstantVelocityProvider {
    fn default() -> Self {
        Self { grid: GridSpec::default(), bandwidth_bins: 1.0, peak_confidence: None }
    }
}

impl DisplacementProvider for ConstantVelocityProvider {
    fn propose(
        &self,
        tracklet: &Tracklet,
        _frame: u32,
        context: &BoundingBox,
    ) -> Result<GridProposal, EstimateError> {
        let layout = self.grid.layout_for(context);
        let bw = (self.bandwidth_bins * layout.step_x(), self.bandwidth_bins * layout.step_y());
        let mut confidences = layout.gaussian_bump(tracklet.speed(), bw);
        if let Some(target) = self.peak_confidence {
            cap_peak(&mut confidences, target);
        }
        Ok(GridProposal { layout, confidences })
    }
}

/// Mixes `c` with the uniform distribution so `max(c)` drops to `target`.
/// No-op when the peak is already at or below the target.
pub(crate) fn cap_peak(c: &mut [f64], target: f64) {
    let n = c.len() as f64;
    let uniform = 1.0 / n;
    let peak = c.iter().copied().fold(0.0, f64::max);
    if peak <= target || peak <= uniform {
        return;
    }
    let target = target.max(uniform);
    let beta = (target - uniform) / (peak - uniform);
    for v in c.iter_mut() {
        *v = beta * *v + (1.0 - beta) * uniform;
    }
}

/// Geometry-only similarity: the IoU of the two boxes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityOverlapProvider;

impl SimilarityProvider for IdentityOverlapProvider {
    fn similarity(&self, a: &BoundingBox, b: &BoundingBox, _frame: u32) -> Result<f64, EstimateError> {
        Ok(iou(a, b))
    }
}

/// Box key at two-decimal precision, stable across parse/print cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxKey([i64; 4]);

impl BoxKey {
    pub fn of(b: &BoundingBox) -> Self {
        let q = |v: f64| (v * 100.0).round() as i64;
        Self([q(b.x()), q(b.y()), q(b.w()), q(b.h())])
    }
}
