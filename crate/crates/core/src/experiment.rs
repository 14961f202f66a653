//! Running the tracker on whole sequences and comparing pairwise modes.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::crf::PairwiseMode;
use crate::estimators::{
    mix_seed, DisplacementProvider, GridSpec, NoisyTruthConfig, NoisyTruthProvider, SimilarityProvider,
    TruthSimilarityProvider,
};
use crate::geometry::BoundingBox;
use crate::metrics::{evaluate, MetricsReport, DEFAULT_MATCH_IOU};
use crate::mot::{generate_scenario, SequenceBundle, SyntheticScenario};
use crate::track::LabeledFrames;
use crate::tracker::{TrackError, TrackOutput, Tracker, TrackerConfig};

/// Seed for the displacement provider's noise, derived from a run seed.
pub fn provider_seed(seed: u64) -> u64 {
    mix_seed(seed, 0x5052_4f56, 1)
}

/// Reads the optional `provider.*` keys: `provider.noise_alpha`,
/// `provider.outlier_rate`, `provider.outlier_bandwidth_bins`,
/// `provider.bins_x`, `provider.bins_y`, `provider.half_range` (pixels, or
/// `auto` to follow the search window). The seed comes from `seed`.
pub fn noisy_truth_config(cfg: &KvConfig, seed: u64) -> Result<NoisyTruthConfig, ConfigError> {
    let d = NoisyTruthConfig::default();
    let half_range = match cfg.raw_opt("provider.half_range") {
        None => d.grid.fixed_half_range,
        Some(v) if v.eq_ignore_ascii_case("auto") => None,
        Some(_) => {
            let v = cfg.get_list("provider.half_range")?;
            match v[..] {
                [r] => Some((r, r)),
                [rx, ry] => Some((rx, ry)),
                _ => {
                    return Err(ConfigError::invalid(
                        "provider.half_range",
                        cfg.raw("provider.half_range")?,
                        "expected one or two numbers",
                    ))
                }
            }
        }
    };
    let c = NoisyTruthConfig {
        grid: GridSpec {
            bins_x: cfg.get_opt("provider.bins_x")?.unwrap_or(d.grid.bins_x),
            bins_y: cfg.get_opt("provider.bins_y")?.unwrap_or(d.grid.bins_y),
            fixed_half_range: half_range,
        },
        noise_alpha: cfg.get_opt("provider.noise_alpha")?.unwrap_or(d.noise_alpha),
        outlier_rate: cfg.get_opt("provider.outlier_rate")?.unwrap_or(d.outlier_rate),
        outlier_bandwidth_bins: cfg.get_opt("provider.outlier_bandwidth_bins")?.unwrap_or(d.outlier_bandwidth_bins),
        seed: provider_seed(seed),
    };
    let bad = |k: &str, v: String, m: &str| Err(ConfigError::invalid(k, &v, m));
    if c.grid.bins_x == 0 || c.grid.bins_y == 0 {
        return bad("provider.bins_x", format!("{}x{}", c.grid.bins_x, c.grid.bins_y), "bins must be positive");
    }
    if !(c.noise_alpha >= 0.0 && c.noise_alpha.is_finite()) {
        return bad("provider.noise_alpha", c.noise_alpha.to_string(), "must be non-negative");
    }
    if !(0.0..=1.0).contains(&c.outlier_rate) {
        return bad("provider.outlier_rate", c.outlier_rate.to_string(), "must lie in [0, 1]");
    }
    if !(c.outlier_bandwidth_bins >= 0.0 && c.outlier_bandwidth_bins.is_finite()) {
        return bad("provider.outlier_bandwidth_bins", c.outlier_bandwidth_bins.to_string(), "must be non-negative");
    }
    Ok(c)
}

pub fn write_noisy_truth_config(c: &NoisyTruthConfig, w: &mut KvWriter) {
    w.comment("ground-truth displacement provider");
    w.set("provider.noise_alpha", c.noise_alpha)
        .set("provider.outlier_rate", c.outlier_rate)
        .set("provider.outlier_bandwidth_bins", c.outlier_bandwidth_bins)
        .set("provider.bins_x", c.grid.bins_x)
        .set("provider.bins_y", c.grid.bins_y);
    match c.grid.fixed_half_range {
        None => w.set("provider.half_range", "auto"),
        Some((rx, ry)) => w.set("provider.half_range", format!("{rx},{ry}")),
    };
}

/// Runs a fresh tracker over every frame of `bundle`.
pub fn track_bundle(
    bundle: &SequenceBundle,
    config: &TrackerConfig,
    displacement: &dyn DisplacementProvider,
    similarity: &dyn SimilarityProvider,
    overlays: bool,
) -> Result<TrackOutput, TrackError> {
    let mut t = Tracker::new(config.clone(), displacement, similarity);
    if overlays {
        t = t.record_overlays();
    }
    t.run(bundle.frame_count, &bundle.detections)
}

/// Providers that read `ground_truth`.
pub fn truth_providers(
    ground_truth: Arc<LabeledFrames>,
    provider: &NoisyTruthConfig,
) -> (NoisyTruthProvider, TruthSimilarityProvider) {
    (
        NoisyTruthProvider::new(Arc::clone(&ground_truth), provider.clone()),
        TruthSimilarityProvider::new(ground_truth),
    )
}

/// Tracks at file precision: what a written and re-read track file holds.
pub fn file_precision(tracks: &LabeledFrames) -> LabeledFrames {
    tracks.map_boxes(BoundingBox::rounded)
}

/// One tracker run on one generated sequence.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub mode: PairwiseMode,
    pub seed: u64,
    pub report: MetricsReport,
    pub mean_iterations: f64,
}

/// Generates the scenario for `seed`, tracks it with ground-truth providers
/// under `mode` and scores the result at file precision.
pub fn ablation_cell(
    scenario: &SyntheticScenario,
    tracker: &TrackerConfig,
    provider: &NoisyTruthConfig,
    mode: PairwiseMode,
    seed: u64,
) -> Result<AblationCell, TrackError> {
    let bundle = generate_scenario(&scenario.with_seed(seed));
    let gt = Arc::new(bundle.ground_truth.clone().expect("generated bundles carry ground truth"));
    let provider = NoisyTruthConfig { seed: provider_seed(seed), ..provider.clone() };
    let (disp, sim) = truth_providers(Arc::clone(&gt), &provider);
    let config = TrackerConfig { crf: tracker.crf.clone().with_mode(mode), ..tracker.clone() };
    let out = track_bundle(&bundle, &config, &disp, &sim, false)?;
    let report = evaluate(&gt, &file_precision(&out.tracks), DEFAULT_MATCH_IOU)
        .expect("tracker output stays inside the sequence");
    Ok(AblationCell { mode, seed, report, mean_iterations: out.stats.mean_iterations() })
}

/// One line of the comparison: a mode over all seeds.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub mode: PairwiseMode,
    pub seeds: usize,
    /// Mean of the per-seed MOTA values.
    pub mean_mota: f64,
    /// Counters summed over seeds.
    pub pooled: MetricsReport,
    pub mean_iterations: f64,
}

/// Groups cells by mode, keeping the order of `modes`.
pub fn summarize(modes: &[PairwiseMode], cells: &[AblationCell]) -> Vec<AblationRow> {
    modes
        .iter()
        .map(|&mode| {
            let mine: Vec<&AblationCell> = cells.iter().filter(|c| c.mode == mode).collect();
            let n = mine.len();
            let mean = |f: &dyn Fn(&AblationCell) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    mine.iter().map(|c| f(c)).sum::<f64>() / n as f64
                }
            };
            AblationRow {
                mode,
                seeds: n,
                mean_mota: mean(&|c| c.report.mota()),
                pooled: MetricsReport::combine(mine.iter().map(|c| &c.report)),
                mean_iterations: mean(&|c| c.mean_iterations),
            }
        })
        .collect()
}

/// Every (mode, seed) cell, sequentially.
pub fn run_ablation(
    scenario: &SyntheticScenario,
    tracker: &TrackerConfig,
    provider: &NoisyTruthConfig,
    modes: &[PairwiseMode],
    seeds: &[u64],
) -> Result<Vec<AblationRow>, TrackError> {
    let mut cells = Vec::with_capacity(modes.len() * seeds.len());
    for &mode in modes {
        for &seed in seeds {
            cells.push(ablation_cell(scenario, tracker, provider, mode, seed)?);
        }
    }
    Ok(summarize(modes, &cells))
}

const ABLATION_COLUMNS: [&str; 13] =
    ["mode", "seeds", "mean_MOTA", "MOTA", "MOTP", "MT", "ML", "FP", "FN", "IDSW", "Frag", "GT", "iterations"];

fn ablation_cells(r: &AblationRow) -> [String; 13] {
    let p = &r.pooled;
    [
        r.mode.as_str().to_string(),
        r.seeds.to_string(),
        format!("{:.2}", r.mean_mota),
        format!("{:.2}", p.mota()),
        format!("{:.2}", p.motp()),
        format!("{:.4}", p.mt()),
        format!("{:.4}", p.ml()),
        p.false_positives.to_string(),
        p.misses.to_string(),
        p.switches.to_string(),
        p.fragmentations.to_string(),
        p.gt_boxes.to_string(),
        format!("{:.2}", r.mean_iterations),
    ]
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = ABLATION_COLUMNS.join(",") + "\n";
    for r in rows {
        out += &ablation_cells(r).join(",");
        out.push('\n');
    }
    out
}

pub fn ablation_text(rows: &[AblationRow]) -> String {
    let table: Vec<[String; 13]> =
        std::iter::once(ABLATION_COLUMNS.map(String::from)).chain(rows.iter().map(ablation_cells)).collect();
    let widths: Vec<usize> =
        (0..ABLATION_COLUMNS.len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
