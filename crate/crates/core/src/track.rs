//! Detections and tracklets.

use crate::geometry::{BoundingBox, Displacement};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// 1-based frame index.
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Where a box in a tracklet's history came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Detection,
    /// Mean of the matched detection and the predicted box (medium-overlap match).
    Averaged,
    /// Predicted box appended while the object had no detection.
    Virtual,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Detection => "detection",
            Provenance::Averaged => "averaged",
            Provenance::Virtual => "virtual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Candidate,
    Active,
    Occluded,
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub provenance: Provenance,
}

/// An identity together with its per-frame boxes.
///
/// The history has no gaps: frames increase by exactly one and frames
/// without a detection carry a `Virtual` box. `missed` always equals the
/// number of trailing virtual entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    id: u64,
    history: Vec<HistoryEntry>,
    speed: Displacement,
    status: TrackStatus,
    missed: u32,
    candidate_count: u32,
    /// Frame at which the tracklet left the candidate pool.
    promoted_at: Option<u32>,
    /// Frame at which the tracklet was terminated; boxes from that frame on
    /// were never emitted.
    terminated_at: Option<u32>,
}

impl Tracklet {
    /// Starts a candidate from a single unmatched detection.
    pub fn candidate(id: u64, frame: u32, bbox: BoundingBox) -> Self {
        Self {
            id,
            history: vec![HistoryEntry { frame, bbox, provenance: Provenance::Detection }],
            speed: Displacement::ZERO,
            status: TrackStatus::Candidate,
            missed: 0,
            candidate_count: 1,
            promoted_at: None,
            terminated_at: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn speed(&self) -> Displacement {
        self.speed
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn missed(&self) -> u32 {
        self.missed
    }

    pub fn candidate_count(&self) -> u32 {
        self.candidate_count
    }

    pub fn promoted_at(&self) -> Option<u32> {
        self.promoted_at
    }

    pub fn terminated_at(&self) -> Option<u32> {
        self.terminated_at
    }

    pub fn last(&self) -> &HistoryEntry {
        self.history.last().expect("tracklet history is never empty")
    }

    pub fn last_box(&self) -> BoundingBox {
        self.last().bbox
    }

    pub fn last_frame(&self) -> u32 {
        self.last().frame
    }

    /// Appends the box for the next frame and refreshes the speed from the
    /// last two centers. Virtual boxes move the speed like any other box.
    ///
    /// Panics if `frame` is not exactly one past the last frame.
    pub fn push(&mut self, frame: u32, bbox: BoundingBox, provenance: Provenance) {
        let prev = self.last_box();
        assert_eq!(frame, self.last_frame() + 1, "tracklet history must stay contiguous");
        self.speed = prev.center_shift_to(&bbox);
        self.history.push(HistoryEntry { frame, bbox, provenance });
        if provenance == Provenance::Virtual {
            self.missed += 1;
            if self.status == TrackStatus::Active {
                self.status = TrackStatus::Occluded;
            }
        } else {
            self.missed = 0;
            if self.status == TrackStatus::Occluded {
                self.status = TrackStatus::Active;
            }
        }
        if self.status == TrackStatus::Candidate {
            self.candidate_count += 1;
        }
    }

    /// Records the mean of the latest displacement evidence. Only a
    /// single-box tracklet uses it, as its speed; longer histories derive
    /// speed from their boxes.
    pub fn observe_evidence_mean(&mut self, mean: Displacement) {
        if self.history.len() == 1 {
            self.speed = mean;
        }
    }

    pub(crate) fn promote(&mut self, id: u64, frame: u32) {
        debug_assert_eq!(self.status, TrackStatus::Candidate);
        self.id = id;
        self.status = TrackStatus::Active;
        self.promoted_at = Some(frame);
    }

    pub(crate) fn terminate(&mut self, frame: u32) {
        self.status = TrackStatus::Terminated;
        self.terminated_at = Some(frame);
    }
}

/// A box carrying an identity: a ground-truth object or a hypothesis track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub id: u64,
    pub bbox: BoundingBox,
}

/// Per-frame labeled boxes for frames `1..=frame_count()`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledFrames {
    frames: Vec<Vec<LabeledBox>>,
}

impl LabeledFrames {
    pub fn new(frame_count: usize) -> Self {
        Self { frames: vec![Vec::new(); frame_count] }
    }

    pub fn from_frames(frames: Vec<Vec<LabeledBox>>) -> Self {
        Self { frames }
    }

    pub fn frame_count(&self) -> u32 {
        self.frames.len() as u32
    }

    /// Boxes at a 1-based frame; empty outside the stored range.
    pub fn at(&self, frame: u32) -> &[LabeledBox] {
        if frame == 0 {
            return &[];
        }
        self.frames.get(frame as usize - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Adds a box, growing the frame range as needed.
    pub fn push(&mut self, frame: u32, item: LabeledBox) {
        assert!(frame >= 1, "frames are 1-based");
        let idx = frame as usize - 1;
        if self.frames.len() <= idx {
            self.frames.resize(idx + 1, Vec::new());
        }
        self.frames[idx].push(item);
    }

    /// Extends the range with empty frames up to `frame_count`.
    pub fn pad_to(&mut self, frame_count: u32) {
        if self.frames.len() < frame_count as usize {
            self.frames.resize(frame_count as usize, Vec::new());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[LabeledBox])> {
        self.frames.iter().enumerate().map(|(i, f)| (i as u32 + 1, f.as_slice()))
    }

    pub fn box_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Sorts each frame by id, the canonical order for output.
    pub fn sort(&mut self) {
        for f in &mut self.frames {
            f.sort_by_key(|b| b.id);
        }
    }

    pub fn map_boxes(&self, f: impl Fn(&BoundingBox) -> BoundingBox) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|fr| fr.iter().map(|b| LabeledBox { id: b.id, bbox: f(&b.bbox) }).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64) -> BoundingBox {
        BoundingBox::new(x, 0.0, 10.0, 20.0).unwrap()
    }

    #[test]
    fn push_tracks_speed_and_missed() {
        let mut t = Tracklet::candidate(1, 3, bb(0.0));
        assert_eq!(t.speed(), Displacement::ZERO);
        t.observe_evidence_mean(Displacement::new(2.0, 1.0));
        assert_eq!(t.speed(), Displacement::new(2.0, 1.0));
        t.promote(7, 3);
        t.push(4, bb(3.0), Provenance::Detection);
        assert_eq!(t.speed(), Displacement::new(3.0, 0.0));
        t.observe_evidence_mean(Displacement::new(9.0, 9.0));
        assert_eq!(t.speed(), Displacement::new(3.0, 0.0));
        t.push(5, bb(5.0), Provenance::Virtual);
        t.push(6, bb(7.0), Provenance::Virtual);
        assert_eq!(t.missed(), 2);
        assert_eq!(t.status(), TrackStatus::Occluded);
        assert_eq!(t.speed(), Displacement::new(2.0, 0.0));
        t.push(7, bb(8.0), Provenance::Averaged);
        assert_eq!(t.missed(), 0);
        assert_eq!(t.status(), TrackStatus::Active);
        assert_eq!(t.id(), 7);
    }

    #[test]
    #[should_panic(expected = "contiguous")]
    fn gaps_are_rejected() {
        let mut t = Tracklet::candidate(1, 3, bb(0.0));
        t.push(5, bb(1.0), Provenance::Detection);
    }

    #[test]
    fn candidate_count_grows_until_promotion() {
        let mut t = Tracklet::candidate(1, 1, bb(0.0));
        t.push(2, bb(1.0), Provenance::Detection);
        assert_eq!(t.candidate_count(), 2);
        t.promote(1, 2);
        t.push(3, bb(2.0), Provenance::Detection);
        assert_eq!(t.candidate_count(), 2);
    }
}
