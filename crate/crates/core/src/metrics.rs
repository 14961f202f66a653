//! CLEAR MOT evaluation.
//!
//! Each frame first keeps every ground-truth object's most recent
//! hypothesis if that hypothesis is still present and overlaps it by at
//! least the match threshold, then pairs up the remaining objects and
//! hypotheses among pairs at or above the threshold: as many pairs as
//! possible, and among those the largest total IoU.
//! A switch is counted when an object's hypothesis differs from the one it
//! was last matched to, however long ago. A fragmentation is counted each
//! time an object present in consecutive appearances goes from matched to
//! unmatched.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::association::{hungarian, SimilarityMatrix};
use crate::geometry::{iou, Displacement};
use crate::track::LabeledFrames;

pub const DEFAULT_MATCH_IOU: f64 = 0.5;
/// Coverage at or above which an object counts as mostly tracked.
pub const MOSTLY_TRACKED: f64 = 0.8;
/// Coverage at or below which an object counts as mostly lost.
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("hypothesis has boxes in frame {frame}, ground truth ends at frame {gt_frames}")]
    FrameRange { frame: u32, gt_frames: u32 },
    #[error("length mismatch: {predicted} predicted vs {truth} true displacements")]
    LengthMismatch { predicted: usize, truth: usize },
}

/// Per-frame audit record.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatches {
    pub frame: u32,
    /// `(gt id, hypothesis id, IoU)`, ascending gt id.
    pub pairs: Vec<(u64, u64, f64)>,
    pub false_positives: u64,
    pub misses: u64,
    pub switches: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub gt_boxes: u64,
    pub gt_objects: u64,
    pub false_positives: u64,
    pub misses: u64,
    pub switches: u64,
    pub fragmentations: u64,
    pub matches: u64,
    pub iou_sum: f64,
    pub mostly_tracked: u64,
    pub mostly_lost: u64,
    pub per_frame: Vec<FrameMatches>,
}

impl MetricsReport {
    /// `100·(1 − (FN + FP + IDSW) / gt boxes)`; NaN without ground truth.
    pub fn mota(&self) -> f64 {
        if self.gt_boxes == 0 {
            return f64::NAN;
        }
        100.0 * (1.0 - (self.misses + self.false_positives + self.switches) as f64 / self.gt_boxes as f64)
    }

    /// Mean IoU of matched pairs in percent; NaN without matches.
    pub fn motp(&self) -> f64 {
        if self.matches == 0 {
            return f64::NAN;
        }
        100.0 * self.iou_sum / self.matches as f64
    }

    /// Share of ground-truth objects tracked for at least 80% of their span.
    pub fn mt(&self) -> f64 {
        ratio(self.mostly_tracked, self.gt_objects)
    }

    /// Share of ground-truth objects tracked for at most 20% of their span.
    pub fn ml(&self) -> f64 {
        ratio(self.mostly_lost, self.gt_objects)
    }

    /// Sums the counters of several sequences. Audit records are dropped.
    pub fn combine<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let mut t = Self::default();
        for r in reports {
            t.gt_boxes += r.gt_boxes;
            t.gt_objects += r.gt_objects;
            t.false_positives += r.false_positives;
            t.misses += r.misses;
            t.switches += r.switches;
            t.fragmentations += r.fragmentations;
            t.matches += r.matches;
            t.iou_sum += r.iou_sum;
            t.mostly_tracked += r.mostly_tracked;
            t.mostly_lost += r.mostly_lost;
        }
        t
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn evaluate(gt: &LabeledFrames, hyp: &LabeledFrames, match_iou: f64) -> Result<MetricsReport, MetricsError> {
    let gt_frames = gt.frame_count();
    if let Some((frame, _)) = hyp.iter().find(|(f, b)| *f > gt_frames && !b.is_empty()) {
        return Err(MetricsError::FrameRange { frame, gt_frames });
    }
    let mut r = MetricsReport::default();
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    // per object: (frames present, frames matched, matched at previous appearance)
    let mut coverage: BTreeMap<u64, (u64, u64, bool)> = BTreeMap::new();

    for (frame, gts) in gt.iter() {
        let hyps = hyp.at(frame);
        let mut gts = gts.to_vec();
        gts.sort_by_key(|g| g.id);
        let mut gt_done = vec![false; gts.len()];
        let mut hyp_done = vec![false; hyps.len()];
        let mut pairs = Vec::new();
        let mut switches = 0;

        for (gi, g) in gts.iter().enumerate() {
            let Some(&h_id) = last_match.get(&g.id) else { continue };
            let Some(hi) = hyps.iter().position(|h| h.id == h_id) else { continue };
            let o = iou(&g.bbox, &hyps[hi].bbox);
            if !hyp_done[hi] && o >= match_iou {
                gt_done[gi] = true;
                hyp_done[hi] = true;
                pairs.push((g.id, h_id, o));
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !gt_done[i]).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&j| !hyp_done[j]).collect();
        let mut m = SimilarityMatrix::new(free_g.len(), free_h.len());
        // a bonus above any achievable IoU total makes cardinality come first
        let bonus = free_g.len().min(free_h.len()) as f64 + 1.0;
        for (a, &gi) in free_g.iter().enumerate() {
            for (b, &hj) in free_h.iter().enumerate() {
                let o = iou(&gts[gi].bbox, &hyps[hj].bbox);
                m.set(a, b, bonus + o);
                if o < match_iou {
                    m.mask(a, b);
                }
            }
        }
        for (a, b) in hungarian(&m) {
            let (g, h) = (&gts[free_g[a]], &hyps[free_h[b]]);
            gt_done[free_g[a]] = true;
            hyp_done[free_h[b]] = true;
            if last_match.get(&g.id).is_some_and(|&prev| prev != h.id) {
                switches += 1;
            }
            pairs.push((g.id, h.id, iou(&g.bbox, &h.bbox)));
        }
        for &(g, h, o) in &pairs {
            last_match.insert(g, h);
            r.iou_sum += o;
        }

        for (gi, g) in gts.iter().enumerate() {
            let c = coverage.entry(g.id).or_insert((0, 0, false));
            c.0 += 1;
            if gt_done[gi] {
                c.1 += 1;
            } else if c.2 {
                r.fragmentations += 1;
            }
            c.2 = gt_done[gi];
        }

        pairs.sort_by_key(|p| p.0);
        let fp = hyp_done.iter().filter(|d| !**d).count() as u64;
        let fn_ = gt_done.iter().filter(|d| !**d).count() as u64;
        r.gt_boxes += gts.len() as u64;
        r.matches += pairs.len() as u64;
        r.false_positives += fp;
        r.misses += fn_;
        r.switches += switches;
        r.per_frame.push(FrameMatches { frame, pairs, false_positives: fp, misses: fn_, switches });
    }

    r.gt_objects = coverage.len() as u64;
    for &(present, matched, _) in coverage.values() {
        let c = matched as f64 / present as f64;
        if c >= MOSTLY_TRACKED {
            r.mostly_tracked += 1;
        }
        if c <= MOSTLY_LOST {
            r.mostly_lost += 1;
        }
    }
    Ok(r)
}

/// Mean L1 distance between predicted and true displacements; 0 for empty
/// input.
pub fn displacement_error(predicted: &[Displacement], truth: &[Displacement]) -> Result<f64, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { predicted: predicted.len(), truth: truth.len() });
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    Ok(predicted.iter().zip(truth).map(|(p, t)| (*p - *t).l1()).sum::<f64>() / predicted.len() as f64)
}

const COLUMNS: [&str; 11] = ["sequence", "MOTA", "MOTP", "MT", "ML", "FP", "FN", "IDSW", "Frag", "GT", "matches"];

fn cells(name: &str, r: &MetricsReport) -> [String; 11] {
    [
        name.to_string(),
        format!("{:.2}", r.mota()),
        format!("{:.2}", r.motp()),
        format!("{:.4}", r.mt()),
        format!("{:.4}", r.ml()),
        r.false_positives.to_string(),
        r.misses.to_string(),
        r.switches.to_string(),
        r.fragmentations.to_string(),
        r.gt_boxes.to_string(),
        r.matches.to_string(),
    ]
}

fn with_overall(rows: &[(String, MetricsReport)]) -> Vec<(String, MetricsReport)> {
    let mut all: Vec<(String, MetricsReport)> = rows.to_vec();
    all.push(("OVERALL".into(), MetricsReport::combine(rows.iter().map(|r| &r.1))));
    all
}

/// Aligned text table, one row per sequence plus OVERALL.
pub fn report_text(rows: &[(String, MetricsReport)]) -> String {
    let table: Vec<[String; 11]> = std::iter::once(COLUMNS.map(String::from))
        .chain(with_overall(rows).iter().map(|(n, r)| cells(n, r)))
        .collect();
    let widths: Vec<usize> = (0..COLUMNS.len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// CSV with a header, one row per sequence plus OVERALL.
pub fn report_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = COLUMNS.join(",") + "\n";
    for (n, r) in with_overall(rows) {
        out += &cells(&n, &r).join(",");
        out.push('\n');
    }
    out
}
