use super::*;
use crate::estimators::ConstantVelocityProvider;

struct Const(f64);
impl SimilarityProvider for Const {
    fn similarity(&self, _: &BoundingBox, _: &BoundingBox, _: u32) -> Result<f64, EstimateError> {
        Ok(self.0)
    }
}

fn bb(x: f64, y: f64) -> BoundingBox {
    BoundingBox::new(x, y, 20.0, 40.0).unwrap()
}

fn det(frame: u32, b: BoundingBox) -> Detection {
    Detection { frame, bbox: b, score: 1.0 }
}

fn cfg(k: u32, m: u32) -> TrackerConfig {
    TrackerConfig {
        lifecycle: LifecycleConfig { k_init: k, m_term: m, ..Default::default() },
        ..Default::default()
    }
}

const CV: ConstantVelocityProvider = ConstantVelocityProvider {
    grid: crate::estimators::GridSpec { bins_x: 21, bins_y: 21, fixed_half_range: None },
    bandwidth_bins: 0.0,
    peak_confidence: None,
};

#[test]
fn empty_frame_only_advances_counter() {
    let sim = Const(1.0);
    let mut t = Tracker::new(cfg(4, 5), &CV, &sim);
    assert!(t.step_frame(1, &[]).unwrap().is_empty());
    assert_eq!(t.frame(), 1);
    assert!(t.live().is_empty() && t.candidates().is_empty() && t.finished().is_empty());
    assert_eq!(t.stats(), &TrackerStats::default());
}

#[test]
fn frame_order_is_enforced() {
    let sim = Const(1.0);
    let mut t = Tracker::new(cfg(4, 5), &CV, &sim);
    assert_eq!(t.step_frame(2, &[]), Err(TrackError::FrameMismatch { expected: 1, got: 2 }));
    assert_eq!(
        t.step_frame(1, &[det(3, bb(0.0, 0.0))]),
        Err(TrackError::DetectionFrame { frame: 1, detection_frame: 3 })
    );
}

#[test]
fn candidate_promoted_after_k_frames() {
    let sim = Const(1.0);
    let mut t = Tracker::new(cfg(4, 5), &CV, &sim);
    for f in 1..=3 {
        assert!(t.step_frame(f, &[det(f, bb(100.0, 100.0))]).unwrap().is_empty());
        assert_eq!(t.candidates().len(), 1);
        assert_eq!(t.candidates()[0].candidate_count(), f);
    }
    let out = t.step_frame(4, &[det(4, bb(100.0, 100.0))]).unwrap();
    assert_eq!(out, vec![LabeledBox { id: 1, bbox: bb(100.0, 100.0) }]);
    assert_eq!(t.live()[0].promoted_at(), Some(4));
    assert_eq!(t.stats().created, 1);

    // detection exactly at the prediction extends the tracklet
    let out = t.step_frame(5, &[det(5, bb(100.0, 100.0))]).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(t.live()[0].missed(), 0);
    assert_eq!(t.live()[0].last().provenance, Provenance::Detection);
}

#[test]
fn weak_visual_similarity_blocks_initialisation() {
    let sim = Const(0.7);
    let mut t = Tracker::new(cfg(2, 5), &CV, &sim);
    for f in 1..=5 {
        t.step_frame(f, &[det(f, bb(100.0, 100.0))]).unwrap();
        assert_eq!(t.candidates().len(), 1);
        assert_eq!(t.candidates()[0].candidate_count(), 1);
    }
    assert!(t.live().is_empty());
}

fn promoted_tracker<'p>(sim: &'p Const, k: u32, m: u32) -> Tracker<'p> {
    let mut t = Tracker::new(cfg(k, m), &CV, sim);
    for f in 1..=k {
        t.step_frame(f, &[det(f, bb(100.0, 100.0))]).unwrap();
    }
    assert_eq!(t.live().len(), 1);
    t
}

#[test]
fn occlusion_recovery_and_termination_boundary() {
    let sim = Const(1.0);
    let (k, m) = (2, 3);
    let mut t = promoted_tracker(&sim, k, m);
    let mut f = k;
    for miss in 1..=m {
        f += 1;
        let out = t.step_frame(f, &[]).unwrap();
        assert_eq!(out.len(), 1, "retained at missed = {miss}");
        assert_eq!(t.live()[0].missed(), miss);
        assert_eq!(t.live()[0].status(), TrackStatus::Occluded);
        assert_eq!(t.live()[0].last().provenance, Provenance::Virtual);
    }
    f += 1;
    t.step_frame(f, &[det(f, bb(100.0, 100.0))]).unwrap();
    assert_eq!(t.live()[0].missed(), 0);
    assert_eq!(t.live()[0].status(), TrackStatus::Active);

    for _ in 0..=m {
        f += 1;
        t.step_frame(f, &[]).unwrap();
    }
    assert!(t.live().is_empty());
    assert_eq!(t.finished()[0].terminated_at(), Some(f));
    assert_eq!(t.stats().terminated, 1);

    // a new object never reuses the old id
    for _ in 0..k {
        f += 1;
        t.step_frame(f, &[det(f, bb(400.0, 100.0))]).unwrap();
    }
    assert_eq!(t.live()[0].id(), 2);
}

fn lifetime(frames: &LabeledFrames, id: u64) -> Vec<u32> {
    frames.iter().filter(|(_, b)| b.iter().any(|x| x.id == id)).map(|(f, _)| f).collect()
}

#[test]
fn output_honours_backfill_and_virtual_flags() {
    let sim = Const(1.0);
    let (k, m) = (3, 2);
    // present 1..=6, then gone for good; sequence ends at 12
    let dets: Vec<Vec<Detection>> =
        (1..=12).map(|f| if f <= 6 { vec![det(f, bb(50.0, 50.0))] } else { vec![] }).collect();
    let run = |backfill: bool, virt: bool| {
        let mut c = cfg(k, m);
        c.lifecycle.backfill_candidates = backfill;
        c.lifecycle.emit_virtual = virt;
        Tracker::new(c, &CV, &sim).run(12, &dets).unwrap()
    };
    // terminated at 6 + m + 1 = 9, so virtual boxes cover 7..=8
    let out = run(true, true);
    assert_eq!(out.tracks.frame_count(), 12);
    assert_eq!(lifetime(&out.tracks, 1), (1..=8).collect::<Vec<_>>());
    assert_eq!(lifetime(&run(false, true).tracks, 1), (3..=8).collect::<Vec<_>>());
    assert_eq!(lifetime(&run(true, false).tracks, 1), (1..=6).collect::<Vec<_>>());
    assert_eq!(lifetime(&run(false, false).tracks, 1), (3..=6).collect::<Vec<_>>());
}

#[test]
fn overlays_are_recorded_on_request() {
    let sim = Const(1.0);
    let dets: Vec<Vec<Detection>> = (1..=3).map(|f| vec![det(f, bb(50.0, 50.0))]).collect();
    let out = Tracker::new(cfg(2, 5), &CV, &sim).record_overlays().run(3, &dets).unwrap();
    let kinds: Vec<_> = out.overlays.iter().map(|r| (r.frame, r.kind)).collect();
    assert_eq!(
        kinds,
        vec![
            (1, OverlayKind::Candidate),
            (3, OverlayKind::Prediction),
            (3, OverlayKind::Detection),
        ]
    );
    let none = Tracker::new(cfg(2, 5), &CV, &sim).run(3, &dets).unwrap();
    assert!(none.overlays.is_empty());
}

#[test]
fn two_objects_keep_their_ids() {
    let sim = Const(1.0);
    let dets: Vec<Vec<Detection>> = (1..=20)
        .map(|f| {
            let s = f as f64;
            vec![det(f, bb(100.0 + 2.0 * s, 100.0)), det(f, bb(300.0 - 2.0 * s, 100.0))]
        })
        .collect();
    let out = Tracker::new(cfg(3, 5), &CV, &sim).run(20, &dets).unwrap();
    for (f, boxes) in out.tracks.iter() {
        assert_eq!(boxes.len(), 2, "frame {f}");
        let left = boxes.iter().find(|b| b.id == 1).unwrap();
        assert!(left.bbox.x() < 200.0);
    }
}
