//! `radar-annotate`: simulate recordings, generate labelled radar datasets,
//! split, augment, count classes and evaluate predictions.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use radar_annotate::dataset::augment::augment_dataset;
use radar_annotate::dataset::evaluate::{evaluate_dirs, EvalOptions};
use radar_annotate::dataset::index::{Layout, CLASSES_FILE, INDEX_FILE, POSES_FILE};
use radar_annotate::dataset::split::{assign_splits, SplitConfig};
use radar_annotate::dataset::stats::count_classes;
use radar_annotate::dataset::{generate_dataset_with, read_index, write_index, DatasetInfo, Recording};
use radar_annotate::geometry::FrameId;
use radar_annotate::grid::GridGeometry;
use radar_annotate::pose_chain::PoseChain;
use radar_annotate::synthetic::{generate_scenario, ScenarioConfig};
use radar_annotate::taxonomy::compute_weights;

use config::FileConfig;

/// Exit status of a generate run in which more than 10% of items failed.
const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "radar-annotate", version, about)]
struct Cli {
    /// TOML settings file with optional [generate], [split], [augment],
    /// [stats] and [evaluate] sections. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [default: one per core]
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic recording with ground truth
    Simulate(SimulateArgs),
    /// Label every radar scan of a recording and write a dataset
    Generate(GenerateArgs),
    /// Assign dataset items to spatially separated splits
    Split(SplitArgs),
    /// Write a randomly flipped copy of a dataset
    Augment(AugmentArgs),
    /// Count label cells per class and write class weights
    Stats(StatsArgs),
    /// Score predicted label grids against a dataset's labels
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Built-in scenario: corridor, boundary_heavy or open_road
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    preset: Option<String>,
    /// Scenario TOML file
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Scenario seed [default: 0, or the scenario file's]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Recording manifest
    #[arg(long)]
    manifest: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// Labelling seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Half-width of the LiDAR accumulation window in seconds [default: 8]
    #[arg(long)]
    window_secs: Option<f64>,
    /// Side of the Cartesian grids in pixels [default: 256]
    #[arg(long)]
    cartesian_size: Option<usize>,
    /// Label without compensating motion between images and LiDAR scans
    #[arg(long)]
    no_motion_correction: bool,
    /// Print each index record to stdout as soon as its files are written
    #[arg(long)]
    stream: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Dataset directory; its index is rewritten with split names
    #[arg(long)]
    dataset: PathBuf,
    /// TOML file of [[region]] entries, each a polygon or a time range
    #[arg(long)]
    regions: PathBuf,
    /// Items nearer than this to a boundary are dropped [default: 10]
    #[arg(long)]
    padding_m: Option<f64>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// Flip seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Only count items of this split [default: all items]
    #[arg(long)]
    split: Option<String>,
    /// Label grids to count: cartesian or polar
    #[arg(long, default_value = "cartesian")]
    layout: Layout,
    /// Weight given to the Empty class [default: 0.1]
    #[arg(long)]
    empty_weight: Option<f64>,
    /// Weights file [default: <dataset>/weights.csv]
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Dataset whose geometry and class names apply
    #[arg(long)]
    dataset: PathBuf,
    /// Directory of predicted label PNGs named like the targets
    #[arg(long)]
    predictions: PathBuf,
    /// Target label directory [default: the dataset's labels for the layout]
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Grid layout of predictions and targets: cartesian or polar
    #[arg(long, default_value = "cartesian")]
    layout: Layout,
    /// Radius of the foreshortened horizon matrix in metres [default: 40]
    #[arg(long)]
    horizon_m: Option<f64>,
    /// Also score cells whose target is Empty
    #[arg(long)]
    include_empty: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a, &file),
        Command::Split(a) => split(a, &file),
        Command::Augment(a) => augment(a, &file),
        Command::Stats(a) => stats(a, &file),
        Command::Evaluate(a) => evaluate(a, &file),
    }
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = match (&a.preset, &a.scenario) {
        (Some(name), _) => ScenarioConfig::preset(name, a.seed.unwrap_or(0))?,
        (None, Some(path)) => ScenarioConfig::load(path)?,
        (None, None) => bail!("either --preset or --scenario is required"),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let manifest = generate_scenario(&cfg, &a.out)?;
    log::info!(
        "wrote {} images, {} LiDAR scans and {} radar scans to {}",
        manifest.images.len(),
        manifest.lidar.len(),
        manifest.radar.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn generate(a: GenerateArgs, file: &FileConfig) -> anyhow::Result<ExitCode> {
    let mut cfg = file.generate.clone();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.window_secs {
        cfg.window_secs = w;
    }
    if let Some(n) = a.cartesian_size {
        cfg.cartesian_size = n;
    }
    if a.no_motion_correction {
        cfg.motion_correction = false;
    }
    let rec = Recording::open(&a.manifest)?;
    let mut stdout = std::io::stdout().lock();
    let report = generate_dataset_with(&rec, cfg, &a.out, |record| {
        if a.stream {
            let line = serde_json::to_string(record).expect("index records serialise");
            if writeln!(stdout, "{line}").and_then(|_| stdout.flush()).is_err() {
                log::warn!("stdout closed; continuing without streaming");
            }
        }
    })?;
    log::info!(
        "{} items written, {} scans skipped, {} failed",
        report.items,
        report.skipped,
        report.failures.len()
    );
    if report.is_partial() {
        log::error!("{:.0}% of items failed", 100.0 * report.failure_fraction());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn split(a: SplitArgs, file: &FileConfig) -> anyhow::Result<ExitCode> {
    let mut regions = SplitConfig::load(&a.regions)?;
    if let Some(p) = a.padding_m.or(file.split.padding_m) {
        regions.padding_m = p;
    }
    regions.validate()?;
    let index = a.dataset.join(INDEX_FILE);
    let mut records = read_index(&index)?;
    let poses = a.dataset.join(POSES_FILE);
    let chain = if poses.is_file() {
        Some(PoseChain::load(&poses, FrameId::radar())?)
    } else {
        None
    };
    let summary = assign_splits(&mut records, &regions, chain.as_ref())?;
    write_index(&index, &records)?;
    let dir = a.dataset.join("splits");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for name in summary.counts.keys() {
        let ids: String = records
            .iter()
            .filter(|r| r.split.as_deref() == Some(name.as_str()))
            .map(|r| format!("{}\n", r.id))
            .collect();
        let path = dir.join(format!("{name}.txt"));
        std::fs::write(&path, ids).with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&summary)?;
    Ok(ExitCode::SUCCESS)
}

fn augment(a: AugmentArgs, file: &FileConfig) -> anyhow::Result<ExitCode> {
    if same_dir(&a.dataset, &a.out) {
        bail!("augmented output must go to a different directory");
    }
    let seed = a.seed.unwrap_or(file.augment.seed);
    let info = DatasetInfo::load(&a.dataset)?;
    let records = read_index(&a.dataset.join(INDEX_FILE))?;
    let augmented = augment_dataset(&a.dataset, &records, &a.out, seed)?;
    info.save(&a.out)?;
    for name in [POSES_FILE, CLASSES_FILE] {
        let src = a.dataset.join(name);
        if src.is_file() {
            std::fs::copy(&src, a.out.join(name)).with_context(|| format!("copying {}", src.display()))?;
        }
    }
    write_index(&a.out.join(INDEX_FILE), &augmented)?;
    log::info!("{} items flipped into {}", augmented.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

#[derive(serde::Serialize)]
struct ClassStats<'a> {
    name: &'a str,
    cells: u64,
    weight: f64,
}

fn stats(a: StatsArgs, file: &FileConfig) -> anyhow::Result<ExitCode> {
    let info = DatasetInfo::load(&a.dataset)?;
    let records = read_index(&a.dataset.join(INDEX_FILE))?;
    let counts = count_classes(&a.dataset, &records, a.split.as_deref(), a.layout, info.classes.len())?;
    let weights = compute_weights(&counts.0, Some(a.empty_weight.unwrap_or(file.stats.empty_weight)))?;
    let path = a.weights.unwrap_or_else(|| a.dataset.join("weights.csv"));
    weights.save(&path)?;
    let rows: Vec<ClassStats> = info
        .classes
        .iter()
        .zip(&counts.0)
        .zip(&weights.0)
        .map(|((name, cells), weight)| ClassStats {
            name,
            cells: *cells,
            weight: *weight,
        })
        .collect();
    print_json(&rows)?;
    Ok(ExitCode::SUCCESS)
}

fn evaluate(a: EvaluateArgs, file: &FileConfig) -> anyhow::Result<ExitCode> {
    let info = DatasetInfo::load(&a.dataset)?;
    let (geometry, default_targets) = match a.layout {
        Layout::Cartesian => (GridGeometry::Cartesian(info.cartesian), "labels"),
        Layout::Polar => (GridGeometry::Polar(info.polar), "labels_polar"),
    };
    let targets = a.targets.unwrap_or_else(|| a.dataset.join(default_targets));
    let opts = EvalOptions {
        num_classes: info.classes.len(),
        geometry,
        horizon_m: Some(a.horizon_m.unwrap_or(file.evaluate.horizon_m)),
        include_empty: a.include_empty || file.evaluate.include_empty,
    };
    let report = evaluate_dirs(&a.predictions, &targets, &info.classes, &opts)?;
    if let Some(acc) = report.full.overall_accuracy {
        log::info!("{} items, accuracy {:.4}", report.items, acc);
    }
    match &a.out {
        Some(path) => {
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        None => print_json(&report)?,
    }
    Ok(ExitCode::SUCCESS)
}
