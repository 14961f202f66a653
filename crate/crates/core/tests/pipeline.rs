use std::path::Path;
use std::sync::Arc;

use mftrack_core::config::KvConfig;
use mftrack_core::crf::PairwiseMode;
use mftrack_core::estimators::{ConstantVelocityProvider, IdentityOverlapProvider, NoisyTruthConfig};
use mftrack_core::experiment::{
    ablation_cell, file_precision, noisy_truth_config, run_ablation, track_bundle, truth_providers,
};
use mftrack_core::metrics::{evaluate, DEFAULT_MATCH_IOU};
use mftrack_core::mot::{generate_scenario, read_detections, read_ground_truth, write_detections, write_labeled, SyntheticScenario};
use mftrack_core::tracker::TrackerConfig;

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn scenario(name: &str) -> SyntheticScenario {
    let kv = KvConfig::load(&configs().join(name)).unwrap();
    let s = SyntheticScenario::from_config(&kv).unwrap();
    kv.ensure_all_used().unwrap();
    s
}

#[test]
fn shipped_configs_load() {
    let kv = KvConfig::load(&configs().join("tracker.cfg")).unwrap();
    let t = TrackerConfig::from_config(&kv).unwrap();
    let p = noisy_truth_config(&kv, 0).unwrap();
    kv.ensure_all_used().unwrap();
    assert_eq!(t, TrackerConfig::default());
    assert_eq!((p.noise_alpha, p.outlier_rate), (0.08, 0.1));
    let kv = KvConfig::load(&configs().join("geometric.cfg")).unwrap();
    let g = TrackerConfig::from_config(&kv).unwrap();
    noisy_truth_config(&kv, 0).unwrap();
    kv.ensure_all_used().unwrap();
    assert_eq!(g.lifecycle.init_visual_gate, 0.5);
    scenario("pan.scenario");
    scenario("crossing.scenario");
}

#[test]
fn generated_files_read_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let b = generate_scenario(&scenario("pan.scenario").with_seed(9));
    write_detections(&dir.path().join("det.txt"), &b.detections).unwrap();
    write_labeled(&dir.path().join("gt.txt"), b.ground_truth.as_ref().unwrap()).unwrap();
    let dets = read_detections(&dir.path().join("det.txt")).unwrap();
    let gt = read_ground_truth(&dir.path().join("gt.txt")).unwrap();
    // trailing empty frames are not recorded in a detection file
    assert_eq!(dets.detections[..], b.detections[..dets.detections.len()]);
    assert!(b.detections[dets.detections.len()..].iter().all(Vec::is_empty));
    let mut expected = b.ground_truth.clone().unwrap();
    expected.sort();
    assert_eq!(gt, expected);
}

#[test]
fn crossing_paths_keep_identities() {
    let s = scenario("crossing.scenario");
    let b = generate_scenario(&s);
    let gt = Arc::new(b.ground_truth.clone().unwrap());
    let (disp, sim) = truth_providers(Arc::clone(&gt), &NoisyTruthConfig::default());
    for mode in PairwiseMode::ALL {
        let config = TrackerConfig { crf: TrackerConfig::default().crf.with_mode(mode), ..TrackerConfig::default() };
        let out = track_bundle(&b, &config, &disp, &sim, false).unwrap();
        let r = evaluate(&gt, &file_precision(&out.tracks), DEFAULT_MATCH_IOU).unwrap();
        assert_eq!((r.switches, r.false_positives, r.misses), (0, 0, 0), "{}", mode.as_str());
        assert_eq!(out.stats.created, s.objects.len() as u64);
    }
}

#[test]
fn analytic_providers_track_a_clean_sequence() {
    let b = generate_scenario(&scenario("crossing.scenario"));
    let kv = KvConfig::load(&configs().join("geometric.cfg")).unwrap();
    let config = TrackerConfig::from_config(&kv).unwrap();
    let out = track_bundle(&b, &config, &ConstantVelocityProvider::default(), &IdentityOverlapProvider, true).unwrap();
    let r = evaluate(b.ground_truth.as_ref().unwrap(), &file_precision(&out.tracks), DEFAULT_MATCH_IOU).unwrap();
    assert_eq!((r.false_positives, r.misses, r.switches), (0, 0, 0));
    assert!(!out.overlays.is_empty());
}

#[test]
fn ablation_is_deterministic_and_grouped() {
    let s = scenario("pan.scenario");
    let kv = KvConfig::load(&configs().join("tracker.cfg")).unwrap();
    let t = TrackerConfig::from_config(&kv).unwrap();
    let p = noisy_truth_config(&kv, 0).unwrap();
    let modes = [PairwiseMode::None, PairwiseMode::Asymmetric];
    let a = run_ablation(&s, &t, &p, &modes, &[4, 5]).unwrap();
    let b = run_ablation(&s, &t, &p, &modes, &[4, 5]).unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a[0].mode, PairwiseMode::None);
    assert_eq!(a[1].seeds, 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.mean_mota.to_bits(), y.mean_mota.to_bits());
        assert_eq!(x.pooled.misses, y.pooled.misses);
    }
    let single = ablation_cell(&s, &t, &p, PairwiseMode::None, 4).unwrap();
    let again = ablation_cell(&s, &t, &p, PairwiseMode::None, 5).unwrap();
    let pooled = single.report.misses + again.report.misses;
    assert_eq!(a[0].pooled.misses, pooled);
}
