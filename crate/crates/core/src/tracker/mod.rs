//! The online tracking loop.
//!
//! Each frame runs, in order: displacement evidence for every live
//! tracklet, CRF inference, prediction, assignment against the frame's
//! detections, occlusion handling for the unmatched, candidate growth and
//! promotion from the leftover detections, and termination.

mod config;

pub use config::{LifecycleConfig, TrackerConfig};

use thiserror::Error;

use crate::association::{
    associate_frame, hungarian, overall_similarity, AssociationConfig, CommitAction, SimilarityMatrix,
};
use crate::crf::{infer, CrfNode};
use crate::estimators::{
    estimate_displacement, visual_similarity, DisplacementProvider, EstimateError, SimilarityProvider,
};
use crate::geometry::{iou, BoundingBox, Displacement};
use crate::track::{Detection, LabeledBox, LabeledFrames, Provenance, TrackStatus, Tracklet};

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("expected frame {expected}, got frame {got}")]
    FrameMismatch { expected: u32, got: u32 },
    #[error("detection for frame {detection_frame} passed to frame {frame}")]
    DetectionFrame { frame: u32, detection_frame: u32 },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerStats {
    pub created: u64,
    pub terminated: u64,
    /// Frames on which inference ran over at least one tracklet.
    pub inference_frames: u64,
    pub inference_iterations: u64,
    pub unconverged_frames: u64,
}

impl TrackerStats {
    pub fn mean_iterations(&self) -> f64 {
        if self.inference_frames == 0 {
            0.0
        } else {
            self.inference_iterations as f64 / self.inference_frames as f64
        }
    }
}

/// What a box in the overlay dump represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayKind {
    /// Last box moved by the inferred displacement.
    Prediction,
    Detection,
    Averaged,
    Virtual,
    Candidate,
}

impl OverlayKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverlayKind::Prediction => "prediction",
            OverlayKind::Detection => "detection",
            OverlayKind::Averaged => "averaged",
            OverlayKind::Virtual => "virtual",
            OverlayKind::Candidate => "candidate",
        }
    }
}

/// One annotated box for external plotting. Candidate rows carry the
/// candidate's internal key, not a track id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayRow {
    pub frame: u32,
    pub id: u64,
    pub kind: OverlayKind,
    pub bbox: BoundingBox,
    /// Inferred displacement for predictions, zero otherwise.
    pub displacement: Displacement,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub tracks: LabeledFrames,
    pub tracklets: Vec<Tracklet>,
    pub stats: TrackerStats,
    pub overlays: Vec<OverlayRow>,
}

/// State for one sequence. Frames must be fed in order starting at 1.
pub struct Tracker<'p> {
    config: TrackerConfig,
    displacement: &'p dyn DisplacementProvider,
    similarity: &'p dyn SimilarityProvider,
    /// Active and occluded tracklets, ascending id.
    live: Vec<Tracklet>,
    candidates: Vec<Tracklet>,
    finished: Vec<Tracklet>,
    next_id: u64,
    next_candidate_key: u64,
    frame: u32,
    stats: TrackerStats,
    overlays: Option<Vec<OverlayRow>>,
}

impl<'p> Tracker<'p> {
    pub fn new(
        config: TrackerConfig,
        displacement: &'p dyn DisplacementProvider,
        similarity: &'p dyn SimilarityProvider,
    ) -> Self {
        Self {
            config,
            displacement,
            similarity,
            live: Vec::new(),
            candidates: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            next_candidate_key: 1,
            frame: 0,
            stats: TrackerStats::default(),
            overlays: None,
        }
    }

    /// Start recording [`OverlayRow`]s.
    pub fn record_overlays(mut self) -> Self {
        self.overlays = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Last processed frame, 0 before the first.
    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn live(&self) -> &[Tracklet] {
        &self.live
    }

    pub fn candidates(&self) -> &[Tracklet] {
        &self.candidates
    }

    pub fn finished(&self) -> &[Tracklet] {
        &self.finished
    }

    pub fn stats(&self) -> &TrackerStats {
        &self.stats
    }

    fn overlay(&mut self, frame: u32, id: u64, kind: OverlayKind, bbox: BoundingBox, d: Displacement) {
        if let Some(rows) = self.overlays.as_mut() {
            rows.push(OverlayRow { frame, id, kind, bbox, displacement: d });
        }
    }

    /// Processes frame `frame` and returns the boxes of every live tracklet
    /// at that frame.
    ///
    /// Boxes emitted here are provisional: promotion can later add earlier
    /// boxes, and `emit_virtual = false` can later withdraw virtual ones.
    /// [`Tracker::finish`] gives the final output.
    pub fn step_frame(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<LabeledBox>, TrackError> {
        if frame != self.frame + 1 {
            return Err(TrackError::FrameMismatch { expected: self.frame + 1, got: frame });
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(TrackError::DetectionFrame { frame, detection_frame: d.frame });
        }

        let predictions = self.predict_live(frame)?;
        let assoc_cfg = AssociationConfig { lambda: self.config.lifecycle.lambda, ..Default::default() };
        let assoc = associate_frame(&predictions, detections, self.similarity, frame, &assoc_cfg)?;

        let mut matched = assoc.matches.iter().peekable();
        for (t, &(id, predicted)) in self.live.iter_mut().zip(&predictions) {
            debug_assert_eq!(t.id(), id);
            let (bbox, prov, kind) = match matched.next_if(|m| m.tracklet_id == id) {
                Some(m) if m.action == CommitAction::Detection => {
                    (m.committed, Provenance::Detection, OverlayKind::Detection)
                }
                Some(m) => (m.committed, Provenance::Averaged, OverlayKind::Averaged),
                None => (predicted, Provenance::Virtual, OverlayKind::Virtual),
            };
            t.push(frame, bbox, prov);
            if let Some(rows) = self.overlays.as_mut() {
                rows.push(OverlayRow { frame, id, kind, bbox, displacement: Displacement::ZERO });
            }
        }

        let leftovers: Vec<Detection> = assoc.unmatched_detections.iter().map(|&j| detections[j]).collect();
        self.extend_candidates(frame, &leftovers)?;
        self.terminate_stale(frame);
        self.frame = frame;

        Ok(self.live.iter().map(|t| LabeledBox { id: t.id(), bbox: t.last_box() }).collect())
    }

    /// Evidence, inference and prediction for every live tracklet, in id
    /// order.
    fn predict_live(&mut self, frame: u32) -> Result<Vec<(u64, BoundingBox)>, TrackError> {
        let params = &self.config.crf;
        let mut nodes = Vec::with_capacity(self.live.len());
        for t in &mut self.live {
            let last = t.last_box();
            let ctx = {
                let l = &self.config.lifecycle;
                last.enlarge(l.context_width_factor, l.context_height_factor)
            };
            let evidence = estimate_displacement(self.displacement, t, frame, &ctx)?;
            t.observe_evidence_mean(evidence.mean());
            nodes.push(CrfNode::new(t.id(), &evidence, t.speed(), &last, params));
        }
        if nodes.is_empty() {
            return Ok(Vec::new());
        }
        let result = infer(&nodes, params);
        self.stats.inference_frames += 1;
        self.stats.inference_iterations += result.iterations as u64;
        if !result.converged {
            self.stats.unconverged_frames += 1;
        }
        let predictions: Vec<(u64, BoundingBox)> = self
            .live
            .iter()
            .zip(&result.displacements)
            .map(|(t, &d)| (t.id(), t.last_box().translate(d)))
            .collect();
        for (&(id, b), &d) in predictions.iter().zip(&result.displacements) {
            self.overlay(frame, id, OverlayKind::Prediction, b, d);
        }
        Ok(predictions)
    }

    /// Grows candidates with the detections no tracklet claimed, seeds new
    /// candidates from the rest and promotes those that reached `k_init`.
    fn extend_candidates(&mut self, frame: u32, detections: &[Detection]) -> Result<(), TrackError> {
        let l = self.config.lifecycle.clone();
        let mut predicted = Vec::with_capacity(self.candidates.len());
        for c in &mut self.candidates {
            let last = c.last_box();
            let ctx = last.enlarge(l.context_width_factor, l.context_height_factor);
            let evidence = estimate_displacement(self.displacement, c, frame, &ctx)?;
            c.observe_evidence_mean(evidence.mean());
            predicted.push(last.translate(evidence.mean()));
        }

        let mut m = SimilarityMatrix::new(self.candidates.len(), detections.len());
        for (i, p) in predicted.iter().enumerate() {
            for (j, d) in detections.iter().enumerate() {
                let o = iou(p, &d.bbox);
                let v = visual_similarity(self.similarity, p, &d.bbox, frame)?;
                m.set(i, j, overall_similarity(v, o, l.lambda));
                if !(o > l.init_iou_gate && v > l.init_visual_gate) {
                    m.mask(i, j);
                }
            }
        }
        let pairs = hungarian(&m);

        let mut det_used = vec![false; detections.len()];
        let old = std::mem::take(&mut self.candidates);
        let mut pairs = pairs.into_iter().peekable();
        for (i, mut c) in old.into_iter().enumerate() {
            // unmatched candidates are dropped
            if let Some((_, j)) = pairs.next_if(|p| p.0 == i) {
                c.push(frame, detections[j].bbox, Provenance::Detection);
                det_used[j] = true;
                self.candidates.push(c);
            }
        }
        for (j, d) in detections.iter().enumerate() {
            if !det_used[j] {
                self.candidates.push(Tracklet::candidate(self.next_candidate_key, frame, d.bbox));
                self.next_candidate_key += 1;
            }
        }

        let mut still = Vec::with_capacity(self.candidates.len());
        for mut c in std::mem::take(&mut self.candidates) {
            if c.candidate_count() >= l.k_init {
                c.promote(self.next_id, frame);
                self.next_id += 1;
                self.stats.created += 1;
                self.live.push(c);
            } else {
                if let Some(rows) = self.overlays.as_mut() {
                    rows.push(OverlayRow {
                        frame,
                        id: c.id(),
                        kind: OverlayKind::Candidate,
                        bbox: c.last_box(),
                        displacement: Displacement::ZERO,
                    });
                }
                still.push(c);
            }
        }
        self.candidates = still;
        Ok(())
    }

    /// Ends tracklets that have gone more than `m_term` frames unmatched.
    fn terminate_stale(&mut self, frame: u32) {
        let m = self.config.lifecycle.m_term;
        let (stale, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live).into_iter().partition(|t| t.missed() > m);
        self.live = keep;
        for mut t in stale {
            t.terminate(frame);
            self.stats.terminated += 1;
            self.finished.push(t);
        }
    }

    /// Runs the tracker over frames `1..=frame_count`; `detections` may be
    /// shorter, missing frames are treated as empty.
    pub fn run(mut self, frame_count: u32, detections: &[Vec<Detection>]) -> Result<TrackOutput, TrackError> {
        for f in 1..=frame_count {
            let dets = detections.get(f as usize - 1).map_or(&[][..], Vec::as_slice);
            self.step_frame(f, dets)?;
        }
        Ok(self.finish())
    }

    /// Final output over frames `1..=frame()`.
    pub fn finish(self) -> TrackOutput {
        let l = &self.config.lifecycle;
        let mut tracks = LabeledFrames::new(self.frame as usize);
        let mut tracklets: Vec<Tracklet> = self.finished.into_iter().chain(self.live).collect();
        tracklets.sort_by_key(Tracklet::id);
        for t in &tracklets {
            for e in emitted(t, l) {
                tracks.push(e.frame, LabeledBox { id: t.id(), bbox: e.bbox });
            }
        }
        tracks.sort();
        TrackOutput { tracks, tracklets, stats: self.stats, overlays: self.overlays.unwrap_or_default() }
    }
}

/// The part of a promoted tracklet's history that belongs in the output.
fn emitted<'t>(t: &'t Tracklet, l: &LifecycleConfig) -> &'t [crate::track::HistoryEntry] {
    let h = t.history();
    let Some(promoted) = t.promoted_at() else { return &[] };
    let first = h[0].frame;
    let start = if l.backfill_candidates { 0 } else { (promoted - first) as usize };
    let mut end = match t.terminated_at() {
        Some(f) => (f - first) as usize,
        None => h.len(),
    };
    if t.status() == TrackStatus::Terminated && !l.emit_virtual {
        while end > start && h[end - 1].provenance == Provenance::Virtual {
            end -= 1;
        }
    }
    &h[start..end.max(start)]
}

#[cfg(test)]
mod tests;
