//! `mftrack`: track, eval, simulate and ablate from the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mftrack_core::config::{ConfigError, KvConfig};
use mftrack_core::crf::PairwiseMode;
use mftrack_core::estimators::{
    ConstantVelocityProvider, DisplacementProvider, FileDisplacementOracle, FileSimilarityOracle,
    IdentityOverlapProvider, NoisyTruthConfig, NoisyTruthProvider, OracleLoadError, SimilarityProvider,
    TruthSimilarityProvider,
};
use mftrack_core::experiment::{
    ablation_cell, ablation_csv, ablation_text, noisy_truth_config, summarize, track_bundle,
};
use mftrack_core::metrics::{evaluate, report_csv, report_text, MetricsError, DEFAULT_MATCH_IOU};
use mftrack_core::mot::{
    generate_scenario, read_detections, read_ground_truth, read_labeled, sequence_name, write_detections,
    write_labeled, write_tracks, MotError, SequenceBundle, SyntheticScenario,
};
use mftrack_core::tracker::{OverlayRow, TrackError, TrackOutput, TrackerConfig};

#[derive(Parser)]
#[command(name = "mftrack", version, about = "Online multi-object tracking with CRF displacement refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track detection files and write MOT-format tracks.
    Track(TrackArgs),
    /// Score track files against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence from a scenario file.
    Simulate(SimulateArgs),
    /// Compare pairwise modes on generated sequences.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DisplacementKind {
    /// Bump around each tracklet's current speed.
    Cv,
    /// Ground truth with configurable noise (needs --gt).
    Truth,
    /// Precomputed grids from --grid-file.
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimilarityKind {
    /// Box overlap.
    Iou,
    /// Same ground-truth object (needs --gt).
    Truth,
    /// Precomputed scores from --similarity-file.
    Oracle,
}

#[derive(Args)]
struct TrackerOpts {
    /// Tracker configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured pairwise mode.
    #[arg(long, value_parser = parse_mode)]
    pairwise_mode: Option<PairwiseMode>,
    /// Override the configured IoU weight in the matching score.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct TrackArgs {
    /// Detection file; repeat for several sequences.
    #[arg(long, required = true)]
    detections: Vec<PathBuf>,
    /// Ground truth, one per detection file, for the truth providers.
    #[arg(long)]
    gt: Vec<PathBuf>,
    /// Output file, or a directory when several sequences are given.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tracker: TrackerOpts,
    #[arg(long, value_enum, default_value = "cv")]
    provider: DisplacementKind,
    #[arg(long, value_enum, default_value = "iou")]
    similarity: SimilarityKind,
    #[arg(long)]
    grid_file: Option<PathBuf>,
    #[arg(long)]
    similarity_file: Option<PathBuf>,
    /// Run seed; the truth provider's noise derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sequences tracked in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write per-frame box annotations next to each output.
    #[arg(long)]
    dump_overlays: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file; repeat in the same order as --tracks.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    #[arg(long, required = true)]
    tracks: Vec<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
    match_iou: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for det.txt, gt.txt and scenario.cfg.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    tracker: TrackerOpts,
    /// Comma-separated pairwise modes.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "asymmetric,symmetric,none")]
    modes: Vec<PairwiseMode>,
    /// Seeds as a list (`1,2,5`) or an inclusive range (`1..20`).
    #[arg(long, value_parser = parse_seeds, default_value = "1..20")]
    seeds: SeedList,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV table path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_mode(s: &str) -> Result<PairwiseMode, String> {
    s.parse()
}

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let bad = || format!("expected `a..b` or a comma-separated list, got {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(SeedList((a..=b).collect()));
    }
    let v: Vec<u64> = s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(SeedList(v))
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Config(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::Config(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Config(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<MotError> for Failure {
    fn from(e: MotError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<OracleLoadError> for Failure {
    fn from(e: OracleLoadError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<TrackError> for Failure {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::Estimate(_) => Failure::Io(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate(a),
        Command::Ablate(a) => ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mftrack: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn require_files(paths: &[&Path]) -> Result<(), Failure> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::Io(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

/// Tracker and provider settings from `--config` (or defaults) with
/// command-line overrides applied. Unknown keys are rejected.
fn load_tracker(opts: &TrackerOpts, seed: u64) -> Result<(TrackerConfig, NoisyTruthConfig), Failure> {
    let (mut config, provider) = match &opts.config {
        None => (TrackerConfig::default(), noisy_truth_config(&KvConfig::default(), seed)?),
        Some(path) => {
            require_files(&[path])?;
            let kv = KvConfig::load(path)?;
            let config = TrackerConfig::from_config(&kv)?;
            let provider = noisy_truth_config(&kv, seed)?;
            kv.ensure_all_used()?;
            (config, provider)
        }
    };
    if let Some(mode) = opts.pairwise_mode {
        config.crf.pairwise_mode = mode;
    }
    if let Some(lambda) = opts.lambda {
        config.lifecycle.lambda = lambda;
        config.lifecycle.validate()?;
    }
    Ok((config, provider))
}

fn track(a: TrackArgs) -> Result<(), Failure> {
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let needs_gt = a.provider == DisplacementKind::Truth || a.similarity == SimilarityKind::Truth;
    if needs_gt && a.gt.len() != a.detections.len() {
        return Err(Failure::Usage("truth providers need one --gt per --detections".into()));
    }
    if !needs_gt && !a.gt.is_empty() && a.gt.len() != a.detections.len() {
        return Err(Failure::Usage("give one --gt per --detections".into()));
    }
    let grid_file = match (a.provider, &a.grid_file) {
        (DisplacementKind::Oracle, None) => return Err(Failure::Usage("--provider oracle needs --grid-file".into())),
        (_, f) => f.clone(),
    };
    let sim_file = match (a.similarity, &a.similarity_file) {
        (SimilarityKind::Oracle, None) => {
            return Err(Failure::Usage("--similarity oracle needs --similarity-file".into()))
        }
        (_, f) => f.clone(),
    };
    let mut inputs: Vec<&Path> = a.detections.iter().map(PathBuf::as_path).collect();
    inputs.extend(a.gt.iter().map(PathBuf::as_path));
    inputs.extend(grid_file.iter().map(PathBuf::as_path));
    inputs.extend(sim_file.iter().map(PathBuf::as_path));
    require_files(&inputs)?;

    let multi = a.detections.len() > 1;
    let mut names: Vec<String> = a.detections.iter().map(|d| sequence_name(d)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Failure::Usage(format!("two detection files share the sequence name {:?}", w[0])));
    }
    if multi {
        fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;
    } else if a.out.is_dir() {
        return Err(Failure::Usage(format!("{} is a directory; give a file path", a.out.display())));
    }
    let (config, provider) = load_tracker(&a.tracker, a.seed)?;

    let mut bundles = Vec::with_capacity(a.detections.len());
    for (i, det) in a.detections.iter().enumerate() {
        let mut b = read_detections(det)?;
        if let Some(gt) = a.gt.get(i) {
            let g = read_ground_truth(gt)?;
            let n = g.frame_count().max(b.frame_count);
            b.ground_truth = Some(g);
            b.pad_to(n);
        }
        bundles.push(b);
    }
    let grid_oracle = grid_file.map(|p| FileDisplacementOracle::load(&p, provider.grid)).transpose()?;
    let sim_oracle = sim_file.map(|p| FileSimilarityOracle::load(&p)).transpose()?;

    let outputs: Vec<Result<TrackOutput, Failure>> = pool(a.jobs)?.install(|| {
        bundles
            .par_iter()
            .map(|b| {
                let gt = b.ground_truth.clone().map(Arc::new);
                let disp: Box<dyn DisplacementProvider> = match a.provider {
                    DisplacementKind::Cv => Box::new(ConstantVelocityProvider { grid: provider.grid, ..Default::default() }),
                    DisplacementKind::Truth => {
                        Box::new(NoisyTruthProvider::new(gt.clone().expect("checked above"), provider.clone()))
                    }
                    DisplacementKind::Oracle => {
                        Box::new(grid_oracle.clone().expect("checked above").with_sequence(b.name.clone()))
                    }
                };
                let sim: Box<dyn SimilarityProvider> = match a.similarity {
                    SimilarityKind::Iou => Box::new(IdentityOverlapProvider),
                    SimilarityKind::Truth => Box::new(TruthSimilarityProvider::new(gt.expect("checked above"))),
                    SimilarityKind::Oracle => {
                        Box::new(sim_oracle.clone().expect("checked above").with_sequence(b.name.clone()))
                    }
                };
                Ok(track_bundle(b, &config, disp.as_ref(), sim.as_ref(), a.dump_overlays)?)
            })
            .collect()
    });

    for (b, out) in bundles.iter().zip(outputs) {
        let out = out?;
        let path = if multi { a.out.join(format!("{}.txt", b.name)) } else { a.out.clone() };
        write_tracks(&path, &out.tracks)?;
        if a.dump_overlays {
            let op = overlay_path(&path);
            fs::write(&op, overlay_csv(&out.overlays)).map_err(|e| io_failure(&op, e))?;
        }
        let s = &out.stats;
        println!(
            "{}: frames {}, tracklets created {}, terminated {}, mean inference iterations {:.2}",
            b.name,
            b.frame_count,
            s.created,
            s.terminated,
            s.mean_iterations()
        );
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Internal(format!("cannot start worker threads: {e}")))
}

fn overlay_path(tracks: &Path) -> PathBuf {
    let stem = tracks.file_stem().map_or_else(|| "tracks".into(), |s| s.to_string_lossy().into_owned());
    tracks.with_file_name(format!("{stem}.overlay.csv"))
}

fn overlay_csv(rows: &[OverlayRow]) -> String {
    let mut out = String::from("frame,id,kind,x,y,w,h,dx,dy\n");
    for r in rows {
        let b = r.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{:.2},{:.2},{:.2},{:.2},{:.3},{:.3}",
            r.frame,
            r.id,
            r.kind.as_str(),
            b.x(),
            b.y(),
            b.w(),
            b.h(),
            r.displacement.dx,
            r.displacement.dy
        );
    }
    out
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    if a.gt.len() != a.tracks.len() {
        return Err(Failure::Usage("give one --tracks per --gt".into()));
    }
    if !(0.0..=1.0).contains(&a.match_iou) || a.match_iou == 0.0 {
        return Err(Failure::Usage("--match-iou must lie in (0, 1]".into()));
    }
    let inputs: Vec<&Path> = a.gt.iter().chain(&a.tracks).map(PathBuf::as_path).collect();
    require_files(&inputs)?;
    let mut rows = Vec::with_capacity(a.gt.len());
    for (g, t) in a.gt.iter().zip(&a.tracks) {
        let gt = read_ground_truth(g)?;
        let hyp = read_labeled(t)?;
        let report = evaluate(&gt, &hyp, a.match_iou)
            .map_err(|e| Failure::Io(format!("{} vs {}: {e}", g.display(), t.display())))?;
        rows.push((sequence_name(t), report));
    }
    print!("{}", report_text(&rows));
    if let Some(out) = &a.out {
        fs::write(out, report_csv(&rows)).map_err(|e| io_failure(out, e))?;
    }
    Ok(())
}

fn load_scenario(path: &Path) -> Result<SyntheticScenario, Failure> {
    require_files(&[path])?;
    let kv = KvConfig::load(path)?;
    let s = SyntheticScenario::from_config(&kv)?;
    kv.ensure_all_used()?;
    Ok(s)
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut scenario = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;
    let bundle: SequenceBundle = generate_scenario(&scenario);
    write_detections(&a.out.join("det.txt"), &bundle.detections)?;
    write_labeled(&a.out.join("gt.txt"), bundle.ground_truth.as_ref().expect("generated bundles carry ground truth"))?;
    // the scenario as run, seed included
    let text = fs::read_to_string(&a.scenario).map_err(|e| io_failure(&a.scenario, e))?;
    let mut kept: Vec<&str> = text.lines().filter(|l| l.split('=').next().map(str::trim) != Some("seed")).collect();
    let seed_line = format!("seed = {}", scenario.seed);
    kept.push(&seed_line);
    let cfg = a.out.join("scenario.cfg");
    fs::write(&cfg, kept.join("\n") + "\n").map_err(|e| io_failure(&cfg, e))?;
    let dets: usize = bundle.detections.iter().map(Vec::len).sum();
    println!(
        "{}: frames {}, objects {}, ground-truth boxes {}, detections {}",
        scenario.name,
        bundle.frame_count,
        scenario.objects.len(),
        bundle.ground_truth.as_ref().map_or(0, |g| g.box_count()),
        dets
    );
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<(), Failure> {
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let scenario = load_scenario(&a.scenario)?;
    let (config, provider) = load_tracker(&a.tracker, 0)?;
    let cells_in: Vec<(PairwiseMode, u64)> =
        a.modes.iter().flat_map(|&m| a.seeds.0.iter().map(move |&s| (m, s))).collect();
    let cells = pool(a.jobs)?.install(|| {
        cells_in
            .par_iter()
            .map(|&(mode, seed)| ablation_cell(&scenario, &config, &provider, mode, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rows = summarize(&a.modes, &cells);
    print!("{}", ablation_text(&rows));
    if let Some(out) = &a.out {
        fs::write(out, ablation_csv(&rows)).map_err(|e| io_failure(out, e))?;
    }
    Ok(())
}
