//! Continuous CRF over object displacements.
//!
//! Every tracked object `i` contributes a unary term
//! `w1_i·|d_i − f_i|²` pulling its displacement toward the visual estimate
//! `f_i`, and for every other object `j` a pairwise term
//! `(1 − w1_i)·Σ_k w_ij^(k)·|(d_i − d_j) − (s_i − s_j)|²` asking that speed
//! differences carry over from the previous frame. `w_ij` is the weight of
//! the message *from* `j` *to* `i`; in the asymmetric mode it grows when `j`
//! is smaller and more confident than `i`.
//!
//! Mean-field inference reduces to the synchronous (Jacobi) update
//!
//! ```text
//! d_i ← [w1_i·f_i + (1−w1_i)·Σ_j W_ij·(d_j + Δs_ij)] / [w1_i + (1−w1_i)·Σ_j W_ij]
//! ```
//!
//! with `W_ij = Σ_k w_ij^(k)` and `Δs_ij = s_i − s_j`. The x and y axes
//! decouple. [`direct_fixed_point_solve`] solves the same fixed point as a
//! linear system and serves as an independent check.

mod inference;
mod params;
mod solve;
mod weights;

use crate::estimators::{unary_confidence_weight, DisplacementEvidence, WEIGHT_MARGIN};
use crate::geometry::{BoundingBox, Displacement};

pub use inference::{energy, infer, max_abs_change, mean_field_step, InferenceResult};
pub use params::{CrfParams, PairwiseMode, WeightingFunction};
pub use solve::{direct_fixed_point_solve, SingularSystem, PIVOT_GUARD};
pub use weights::{pairwise_weight, symmetric_pairwise_weight, PairWeights};

/// One tracked object as seen by the CRF: its visual estimate, the unary
/// weight derived from that estimate's confidence, and the previous-frame
/// quantities the pairwise weights depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfNode {
    pub tracklet_id: u64,
    evidence_mean: Displacement,
    max_confidence: f64,
    w1: f64,
    speed: Displacement,
    area: f64,
    center: (f64, f64),
}

impl CrfNode {
    /// Builds a node from provider evidence and the object's last box.
    pub fn new(
        tracklet_id: u64,
        evidence: &DisplacementEvidence,
        speed: Displacement,
        last_box: &BoundingBox,
        params: &CrfParams,
    ) -> Self {
        let w1 = unary_confidence_weight(evidence.max_confidence(), params.a1, params.b1);
        Self {
            tracklet_id,
            evidence_mean: evidence.mean(),
            max_confidence: evidence.max_confidence(),
            w1,
            speed,
            area: last_box.area(),
            center: last_box.center(),
        }
    }

    /// Builds a node from explicit values. `w1` is clamped into the open
    /// unit interval.
    ///
    /// Panics if `area` is not positive.
    pub fn from_parts(
        tracklet_id: u64,
        evidence_mean: Displacement,
        max_confidence: f64,
        w1: f64,
        speed: Displacement,
        area: f64,
        center: (f64, f64),
    ) -> Self {
        assert!(area > 0.0, "node area must be positive");
        Self {
            tracklet_id,
            evidence_mean,
            max_confidence,
            w1: w1.clamp(WEIGHT_MARGIN, 1.0 - WEIGHT_MARGIN),
            speed,
            area,
            center,
        }
    }

    pub fn evidence_mean(&self) -> Displacement {
        self.evidence_mean
    }
    pub fn max_confidence(&self) -> f64 {
        self.max_confidence
    }
    pub fn w1(&self) -> f64 {
        self.w1
    }
    pub fn speed(&self) -> Displacement {
        self.speed
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn center(&self) -> (f64, f64) {
        self.center
    }
}
