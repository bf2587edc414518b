//! The `tactrack` binary: generate synthetic tactile tracking datasets,
//! run the tracker on a dataset, score pose tracks against ground truth,
//! drive config-based experiment batches, and measure tracking speed.
//!
//! All file formats are the JSON/CSV contracts of the `tactrack` library;
//! the binary itself only parses arguments, moves bytes, and prints one
//! summary line per result so runs compose in shell scripts.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tactrack::dataset::{
    read_pose_track, read_trajectory, write_poses, write_trajectory, PoseFile, TrajectoryFile,
};
use tactrack::experiment::{
    load_experiment_config, measure_speed, run_experiment, StageTimings, TrackReport,
};
use tactrack::geom::Pose;
use tactrack::metrics::{aggregate, compute_metrics, frame_errors, MetricAggregates};
use tactrack::sim::{synthesize_trajectory, ContactNoiseSpec, HypothesisNoiseSpec, TrajectorySpec};
use tactrack::tracker::{track_fused, TrackMode, TrackerConfig};

#[derive(Parser)]
#[command(name = "tactrack", version, about = "Tactile-kinematic 6D pose tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory dataset.
    Simulate {
        /// Generation config (JSON). Every field is optional; omitting the
        /// flag generates the default 100-frame calibrated trajectory.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the dataset.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track one dataset in one mode and write the estimated pose track.
    Track {
        /// Input trajectory dataset.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Fused)]
        mode: ModeArg,
        /// Sliding window length in frames.
        #[arg(long, default_value_t = 5)]
        window_n: usize,
        /// Hypothesis translation weight (meters).
        #[arg(long, default_value_t = 0.01)]
        lambda_t: f64,
        /// Hypothesis rotation weight (radians).
        #[arg(long, default_value_t = 0.1)]
        lambda_r: f64,
        /// Where to write the estimated poses.
        #[arg(long)]
        out: PathBuf,
        /// Also write the full per-frame error report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score an estimated pose track against ground truth.
    Eval {
        /// Estimated poses (pose file or trajectory dataset).
        estimates: PathBuf,
        /// Ground truth poses (pose file or trajectory dataset).
        ground_truth: PathBuf,
        /// Also write the aggregates as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of an experiment config and write reports + CSV.
    Experiment {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Measure per-stage tracking speed on a dataset.
    Speed {
        /// Input trajectory dataset (>= 100 frames).
        input: PathBuf,
        /// Sliding window length in frames.
        #[arg(long, default_value_t = 5)]
        window_n: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    KinematicsOnly,
    VisualOnly,
    Fused,
}

impl From<ModeArg> for TrackMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::KinematicsOnly => TrackMode::KinematicsOnly,
            ModeArg::VisualOnly => TrackMode::VisualOnly,
            ModeArg::Fused => TrackMode::Fused,
        }
    }
}

fn mode_name(mode: TrackMode) -> &'static str {
    match mode {
        TrackMode::KinematicsOnly => "kinematics_only",
        TrackMode::VisualOnly => "visual_only",
        TrackMode::Fused => "fused",
    }
}

/// Config for `simulate`. The trajectory is the seeded calibrated profile
/// unless `trajectory` spells out a full sinusoid table, in which case that
/// table wins and `seed`/`frame_count`/`fps` are ignored.
#[derive(Debug, Deserialize)]
#[serde(default)]
struct SimulateConfig {
    object_id: String,
    seed: u64,
    frame_count: usize,
    fps: f64,
    trajectory: Option<TrajectorySpec>,
    contact_noise: ContactNoiseSpec,
    /// `null` disables hypothesis generation entirely.
    hypothesis_noise: Option<HypothesisNoiseSpec>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            object_id: "synthetic".to_string(),
            seed: 0,
            frame_count: 100,
            fps: 30.0,
            trajectory: None,
            contact_noise: ContactNoiseSpec::default(),
            hypothesis_noise: Some(HypothesisNoiseSpec::default()),
        }
    }
}

fn simulate(config: Option<PathBuf>, out: PathBuf) -> anyhow::Result<()> {
    let config: SimulateConfig = match config {
        None => SimulateConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
    };
    let spec = config.trajectory.unwrap_or_else(|| TrajectorySpec {
        frame_count: config.frame_count,
        fps: config.fps,
        ..TrajectorySpec::calibrated(config.seed)
    });
    let frames = synthesize_trajectory(
        &spec,
        &config.contact_noise,
        config.hypothesis_noise.as_ref(),
        &Pose::identity(),
    );
    let file = TrajectoryFile::from_sim_frames(&config.object_id, spec.fps, &frames);
    write_trajectory(&out, &file).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} frames ({} contacts/frame) to {}",
        file.frames.len(),
        file.frames.first().map_or(0, |f| f.contacts.points.len()),
        out.display()
    );
    Ok(())
}

fn track(
    input: PathBuf,
    config: TrackerConfig,
    out: PathBuf,
    report_path: Option<PathBuf>,
) -> anyhow::Result<()> {
    let file =
        read_trajectory(&input).with_context(|| format!("reading {}", input.display()))?;
    let frames = file.contact_frames()?;
    let ground_truth = file.gt_poses();
    let initial = ground_truth[0];

    let started = Instant::now();
    let estimates = track_fused(&frames, &file, &initial, &config)
        .with_context(|| format!("tracking {}", input.display()))?;
    let track_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let per_frame = frame_errors(&estimates, &ground_truth)?;
    let aggregates = aggregate(&per_frame)?;
    let metrics_seconds = started.elapsed().as_secs_f64();

    write_poses(&out, &PoseFile::from_poses(&estimates))
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = report_path {
        let report = TrackReport {
            seed: 0,
            mode: config.mode,
            tracker: config.clone(),
            frames: per_frame,
            aggregates,
            timings: StageTimings { simulate_seconds: 0.0, track_seconds, metrics_seconds },
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{} ({} frames): {}",
        mode_name(config.mode),
        estimates.len(),
        summary_line(&aggregates)
    );
    Ok(())
}

fn eval(estimates: PathBuf, ground_truth: PathBuf, out: Option<PathBuf>) -> anyhow::Result<()> {
    let est = read_pose_track(&estimates)
        .with_context(|| format!("reading {}", estimates.display()))?;
    let gt = read_pose_track(&ground_truth)
        .with_context(|| format!("reading {}", ground_truth.display()))?;
    let aggregates = compute_metrics(&est, &gt)?;
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&aggregates).expect("aggregates serialize");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{} frames: {}", est.len(), summary_line(&aggregates));
    Ok(())
}

fn experiment(config_path: PathBuf) -> anyhow::Result<()> {
    let config = load_experiment_config(&config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    let summary = run_experiment(&config)?;
    for cell in &summary.cells {
        match (&cell.aggregates, &cell.error) {
            (Some(aggregates), _) => println!("{}: {}", cell.name, summary_line(aggregates)),
            (None, Some(error)) => println!("{}: failed: {error}", cell.name),
            (None, None) => unreachable!("cell without aggregates or error"),
        }
    }
    println!(
        "{} cells ({} failed), aggregate table at {}",
        summary.cells.len(),
        summary.failed,
        summary.csv_path.display()
    );
    Ok(())
}

fn speed(input: PathBuf, window_n: usize) -> anyhow::Result<()> {
    let file =
        read_trajectory(&input).with_context(|| format!("reading {}", input.display()))?;
    let config = TrackerConfig { window_n, ..TrackerConfig::default() };
    let report = measure_speed(&file, &config)?;
    println!(
        "kinematic estimation: {:.3} ms/frame ({:.0} FPS); window optimization (N={}): \
         {:.3} ms/frame ({:.0} FPS); {} contacts, {} frames timed",
        report.kinematics_median_ms,
        report.kinematics_fps,
        report.window_n,
        report.window_median_ms,
        report.window_fps,
        report.contact_count,
        report.frames_timed
    );
    Ok(())
}

fn summary_line(aggregates: &MetricAggregates) -> String {
    format!(
        "5deg5cm {:.1}%  5deg5mm {:.1}%  mean {:.3} deg / {:.3} mm",
        aggregates.pct_5deg5cm,
        aggregates.pct_5deg5mm,
        aggregates.mean_rot_deg,
        aggregates.mean_trans_mm
    )
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Track { input, mode, window_n, lambda_t, lambda_r, out, report } => {
            let config = TrackerConfig {
                mode: mode.into(),
                window_n,
                lambda_t,
                lambda_r,
                ..TrackerConfig::default()
            };
            track(input, config, out, report)
        }
        Command::Eval { estimates, ground_truth, out } => eval(estimates, ground_truth, out),
        Command::Experiment { config } => experiment(config),
        Command::Speed { input, window_n } => speed(input, window_n),
    }
}
