//! Config-driven batch evaluation: run (trajectory x mode x sweep) cells,
//! write one JSON report per cell plus a deterministic aggregate CSV, and
//! measure per-stage tracking speed.
//!
//! Cells are independent; a failing cell is recorded and the run continues,
//! so sweeps always produce complete, comparable tables. Wall-clock timings
//! live only in the per-cell JSON reports, never in the CSV, which makes
//! reruns of one config byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_trajectory, DatasetError, TrajectoryFile};
use crate::geom::Pose;
use crate::kinematics::{estimate_kinematics, ContactObservation};
use crate::metrics::{aggregate, frame_errors, FrameError, MetricAggregates, MetricsError};
use crate::sim::{
    derive_seed, synthesize_trajectory, ContactNoiseSpec, HypothesisNoiseSpec, TrajectorySpec,
};
use crate::tracker::{
    integrate_pose, track_fused, window_optimize, Hypothesis, HypothesisSource, TrackMode,
    TrackerConfig, WindowFrame, WindowState,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: &'static str, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("failed to write aggregate CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Wall-clock seconds spent in each stage of one cell. Diagnostic only;
/// excluded from everything that must be deterministic.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub simulate_seconds: f64,
    pub track_seconds: f64,
    pub metrics_seconds: f64,
}

/// Everything one tracking run produced: the per-frame errors, their
/// aggregates, and enough context (config echo, seed) to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackReport {
    pub seed: u64,
    pub mode: TrackMode,
    pub tracker: TrackerConfig,
    pub frames: Vec<FrameError>,
    pub aggregates: MetricAggregates,
    pub timings: StageTimings,
}

/// Parameter swept across cells, multiplying the (trajectory x mode) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Window length of the fused tracker.
    WindowN(Vec<usize>),
    /// Contact position noise in millimeters; requires generated data.
    PositionSigmaMm(Vec<f64>),
}

impl Sweep {
    fn len(&self) -> usize {
        match self {
            Sweep::WindowN(v) => v.len(),
            Sweep::PositionSigmaMm(v) => v.len(),
        }
    }
}

/// Batch run description, read from a JSON file. Data comes either from
/// `datasets` (trajectory files, replayed as stored) or, when that list is
/// empty, from trajectories generated per seed with the calibrated motion
/// profile and the configured noise. Per-cell noise seeds are derived from
/// the configured base seeds and the cell's seed, so cells are independent
/// but the whole run is reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub modes: Vec<TrackMode>,
    pub tracker: TrackerConfig,
    pub contact_noise: ContactNoiseSpec,
    pub hypothesis_noise: HypothesisNoiseSpec,
    pub datasets: Vec<PathBuf>,
    /// Frames per generated trajectory.
    pub frame_count: usize,
    /// Sampling rate of generated trajectories.
    pub fps: f64,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0],
            modes: vec![TrackMode::Fused],
            tracker: TrackerConfig::default(),
            contact_noise: ContactNoiseSpec::default(),
            hypothesis_noise: HypothesisNoiseSpec::default(),
            datasets: Vec::new(),
            frame_count: 100,
            fps: 30.0,
            sweep: None,
            output_dir: PathBuf::from("reports"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |field, message: String| ExperimentError::ConfigInvalid { field, message };
        if self.modes.is_empty() {
            return Err(invalid("modes", "at least one tracking mode is required".into()));
        }
        if self.datasets.is_empty() {
            if self.seeds.is_empty() {
                return Err(invalid(
                    "seeds",
                    "either seeds (generated data) or datasets (files) must be non-empty".into(),
                ));
            }
            if self.frame_count < 2 {
                return Err(invalid("frame_count", "generated trajectories need >= 2 frames".into()));
            }
            if self.fps.is_nan() || self.fps <= 0.0 {
                return Err(invalid("fps", format!("must be positive, got {}", self.fps)));
            }
        }
        match &self.sweep {
            Some(s) if s.len() == 0 => {
                return Err(invalid("sweep", "sweep value list is empty".into()));
            }
            Some(Sweep::WindowN(values)) if values.contains(&0) => {
                return Err(invalid("sweep.window_n", "window sizes must be >= 1".into()));
            }
            Some(Sweep::PositionSigmaMm(values)) => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid(
                        "sweep.position_sigma_mm",
                        "sigmas must be finite and non-negative".into(),
                    ));
                }
                if !self.datasets.is_empty() {
                    return Err(invalid(
                        "sweep.position_sigma_mm",
                        "a noise sweep regenerates contacts and cannot run on fixed dataset files"
                            .into(),
                    ));
                }
            }
            _ => {}
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty".into()));
        }
        Ok(())
    }
}

pub fn load_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ExperimentError> {
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| ExperimentError::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    config.validate()?;
    Ok(config)
}

/// Outcome of one cell: either a report or the error that stopped it.
#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    /// Stable cell name; also the report file stem.
    pub name: String,
    pub seed: u64,
    pub mode: TrackMode,
    pub sweep_value: Option<f64>,
    pub frame_count: usize,
    pub aggregates: Option<MetricAggregates>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub cells: Vec<CellOutcome>,
    pub csv_path: PathBuf,
    pub failed: usize,
}

/// In-memory form of one cell's data, however it was sourced.
struct CellData {
    frames: Vec<(f64, ContactObservation)>,
    hypotheses: Vec<Option<Hypothesis>>,
    ground_truth: Vec<Pose>,
    simulate_seconds: f64,
}

fn generated_cell(config: &ExperimentConfig, seed: u64, position_sigma: Option<f64>) -> CellData {
    let started = Instant::now();
    let spec = TrajectorySpec {
        frame_count: config.frame_count,
        fps: config.fps,
        ..TrajectorySpec::calibrated(seed)
    };
    let contact_noise = ContactNoiseSpec {
        seed: derive_seed(config.contact_noise.seed, seed),
        position_sigma: position_sigma.unwrap_or(config.contact_noise.position_sigma),
        ..config.contact_noise
    };
    let hypothesis_noise = HypothesisNoiseSpec {
        seed: derive_seed(config.hypothesis_noise.seed, seed),
        ..config.hypothesis_noise
    };
    let sim = synthesize_trajectory(&spec, &contact_noise, Some(&hypothesis_noise), &Pose::identity());
    CellData {
        frames: sim.iter().map(|f| (f.timestamp, f.contacts.clone())).collect(),
        hypotheses: sim.iter().map(|f| f.hypothesis).collect(),
        ground_truth: sim.iter().map(|f| f.pose).collect(),
        simulate_seconds: started.elapsed().as_secs_f64(),
    }
}

fn loaded_cell(path: &Path) -> Result<CellData, ExperimentError> {
    let started = Instant::now();
    let file = read_trajectory(path)?;
    let frames = file.contact_frames()?;
    let hypotheses = (0..file.frames.len()).map(|k| file.hypothesis(k)).collect();
    Ok(CellData {
        frames,
        hypotheses,
        ground_truth: file.gt_poses(),
        simulate_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs one already-materialized cell and assembles its report.
pub fn run_cell(
    data_frames: &[(f64, ContactObservation)],
    hypotheses: &dyn HypothesisSource,
    ground_truth: &[Pose],
    tracker: &TrackerConfig,
    seed: u64,
) -> Result<TrackReport, String> {
    let initial = ground_truth.first().ok_or_else(|| "empty trajectory".to_string())?;
    let started = Instant::now();
    let estimates =
        track_fused(data_frames, hypotheses, initial, tracker).map_err(|e| e.to_string())?;
    let track_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let frames = frame_errors(&estimates, ground_truth).map_err(|e| e.to_string())?;
    let aggregates = aggregate(&frames).map_err(|e| e.to_string())?;
    let metrics_seconds = started.elapsed().as_secs_f64();

    Ok(TrackReport {
        seed,
        mode: tracker.mode,
        tracker: tracker.clone(),
        frames,
        aggregates,
        timings: StageTimings { simulate_seconds: 0.0, track_seconds, metrics_seconds },
    })
}

fn mode_label(mode: TrackMode) -> &'static str {
    match mode {
        TrackMode::KinematicsOnly => "kinematics_only",
        TrackMode::VisualOnly => "visual_only",
        TrackMode::Fused => "fused",
    }
}

fn sweep_points(sweep: &Option<Sweep>) -> Vec<(Option<f64>, String)> {
    match sweep {
        None => vec![(None, String::new())],
        Some(Sweep::WindowN(values)) => {
            values.iter().map(|&n| (Some(n as f64), format!("_w{n:02}"))).collect()
        }
        Some(Sweep::PositionSigmaMm(values)) => {
            values.iter().map(|&s| (Some(s), format!("_sigma{s}mm"))).collect()
        }
    }
}

fn csv_float(v: f64) -> String {
    let mut buffer = ryu_format(v);
    // Trailing ".0" on integral values keeps the column visibly numeric.
    if !buffer.contains('.') && !buffer.contains('e') {
        buffer.push_str(".0");
    }
    buffer
}

fn ryu_format(v: f64) -> String {
    // serde_json uses the shortest round-trip decimal; reuse it so the CSV
    // and the JSON reports print any given value identically.
    serde_json::to_string(&v).expect("finite float")
}

/// Executes every cell of the config and writes the per-cell JSON reports
/// plus `aggregate.csv` into `output_dir`. Cell failures are recorded in
/// the summary and the CSV (`status` column) without aborting the run.
///
/// CSV columns, in order: cell, seed, mode, sweep, sweep_value, frames,
/// pct_5deg5cm, pct_5deg5mm, mean_rot_deg, mean_trans_mm, status. Metric
/// cells are empty on failed rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;

    // (label, seed, data) triples in deterministic order.
    enum Source<'a> {
        Generated(u64),
        Loaded(&'a Path),
    }
    let sources: Vec<(String, u64, Source)> = if config.datasets.is_empty() {
        config
            .seeds
            .iter()
            .map(|&seed| (format!("seed{seed:04}"), seed, Source::Generated(seed)))
            .collect()
    } else {
        config
            .datasets
            .iter()
            .enumerate()
            .map(|(i, path)| {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("dataset{i}"));
                (stem, i as u64, Source::Loaded(path.as_path()))
            })
            .collect()
    };

    let mut cells = Vec::new();
    for (label, seed, source) in &sources {
        for (sweep_value, sweep_suffix) in sweep_points(&config.sweep) {
            // Load or synthesize once per (trajectory, sweep point); all
            // modes compare on identical data.
            let data = match source {
                Source::Generated(seed) => {
                    let position_sigma = match (&config.sweep, sweep_value) {
                        (Some(Sweep::PositionSigmaMm(_)), Some(mm)) => Some(mm * 1e-3),
                        _ => None,
                    };
                    Ok(generated_cell(config, *seed, position_sigma))
                }
                Source::Loaded(path) => loaded_cell(path),
            };
            for &mode in &config.modes {
                let name = format!("{label}_{}{sweep_suffix}", mode_label(mode));
                let mut tracker = TrackerConfig { mode, ..config.tracker.clone() };
                if let (Some(Sweep::WindowN(_)), Some(n)) = (&config.sweep, sweep_value) {
                    tracker.window_n = n as usize;
                }
                let outcome = match &data {
                    Err(e) => Err(e.to_string()),
                    Ok(data) => run_cell(
                        &data.frames,
                        &data.hypotheses,
                        &data.ground_truth,
                        &tracker,
                        *seed,
                    )
                    .map(|mut report| {
                        report.timings.simulate_seconds = data.simulate_seconds;
                        report
                    }),
                };
                let cell = match outcome {
                    Ok(report) => {
                        let path = config.output_dir.join(format!("{name}.json"));
                        let mut text = serde_json::to_string_pretty(&report)
                            .expect("report serializes");
                        text.push('\n');
                        fs::write(&path, text)?;
                        CellOutcome {
                            name,
                            seed: *seed,
                            mode,
                            sweep_value,
                            frame_count: report.frames.len(),
                            aggregates: Some(report.aggregates),
                            error: None,
                        }
                    }
                    Err(message) => CellOutcome {
                        name,
                        seed: *seed,
                        mode,
                        sweep_value,
                        frame_count: 0,
                        aggregates: None,
                        error: Some(message),
                    },
                };
                cells.push(cell);
            }
        }
    }

    let csv_path = config.output_dir.join("aggregate.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record([
        "cell",
        "seed",
        "mode",
        "sweep",
        "sweep_value",
        "frames",
        "pct_5deg5cm",
        "pct_5deg5mm",
        "mean_rot_deg",
        "mean_trans_mm",
        "status",
    ])?;
    let sweep_name = match &config.sweep {
        None => "",
        Some(Sweep::WindowN(_)) => "window_n",
        Some(Sweep::PositionSigmaMm(_)) => "position_sigma_mm",
    };
    for cell in &cells {
        let metrics = match &cell.aggregates {
            Some(a) => [
                csv_float(a.pct_5deg5cm),
                csv_float(a.pct_5deg5mm),
                csv_float(a.mean_rot_deg),
                csv_float(a.mean_trans_mm),
            ],
            None => [String::new(), String::new(), String::new(), String::new()],
        };
        writer.write_record([
            cell.name.as_str(),
            &cell.seed.to_string(),
            mode_label(cell.mode),
            sweep_name,
            &cell.sweep_value.map(csv_float).unwrap_or_default(),
            &cell.frame_count.to_string(),
            &metrics[0],
            &metrics[1],
            &metrics[2],
            &metrics[3],
            if cell.error.is_none() { "ok" } else { "failed" },
        ])?;
    }
    writer.flush()?;

    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    Ok(ExperimentSummary { cells, csv_path, failed })
}

/// Median per-frame wall time of the two tracking stages, as frames per
/// second. The dataset must have at least 100 frames so the medians are
/// stable; hypotheses are taken from the file or substituted with exact
/// ground truth when absent (the optimizer's work does not depend on how
/// accurate they are).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpeedReport {
    pub frames_timed: usize,
    pub contact_count: usize,
    pub window_n: usize,
    pub kinematics_median_ms: f64,
    pub kinematics_fps: f64,
    pub window_median_ms: f64,
    pub window_fps: f64,
}

fn median(mut samples: Vec<f64>) -> f64 {
    assert!(!samples.is_empty());
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    }
}

pub fn measure_speed(
    file: &TrajectoryFile,
    config: &TrackerConfig,
) -> Result<SpeedReport, ExperimentError> {
    let frames = file.contact_frames()?;
    assert!(frames.len() >= 100, "speed measurement needs >= 100 frames");
    let ground_truth = file.gt_poses();
    let hypotheses: Vec<Option<Hypothesis>> = (0..frames.len())
        .map(|k| {
            file.hypothesis(k)
                .or(Some(Hypothesis { pose: ground_truth[k], confidence: 1.0 }))
        })
        .collect();

    let mut kinematics_times = Vec::with_capacity(frames.len());
    let mut window_times = Vec::with_capacity(frames.len());
    let mut window = WindowState::new(config.window_n);
    let mut current = ground_truth[0];
    let mut prev_ts: Option<f64> = None;
    for (k, (timestamp, obs)) in frames.iter().enumerate() {
        let started = Instant::now();
        let estimate = estimate_kinematics(obs, &current.translation)
            .expect("contact_frames already validated the observations");
        kinematics_times.push(started.elapsed().as_secs_f64());

        let twist = estimate.twist.transported(&estimate.center, &current.translation);
        let provisional = match prev_ts {
            None => current,
            Some(prev) => integrate_pose(&current, &twist, timestamp - prev),
        };
        prev_ts = Some(*timestamp);
        window.push(WindowFrame {
            timestamp: *timestamp,
            twist,
            hypothesis: hypotheses[k],
            pose: provisional,
        });
        let started = Instant::now();
        let updated = window_optimize(&mut window, config).expect("optimizer budget is valid");
        window_times.push(started.elapsed().as_secs_f64());
        current = *updated.last().expect("window is non-empty");
    }

    let kinematics_median = median(kinematics_times);
    let window_median = median(window_times);
    Ok(SpeedReport {
        frames_timed: frames.len(),
        contact_count: frames[0].1.len(),
        window_n: config.window_n,
        kinematics_median_ms: kinematics_median * 1e3,
        kinematics_fps: 1.0 / kinematics_median,
        window_median_ms: window_median * 1e3,
        window_fps: 1.0 / window_median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::write_trajectory;
    use approx::assert_abs_diff_eq;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            seeds: vec![0, 1, 2],
            modes: vec![TrackMode::Fused, TrackMode::VisualOnly],
            frame_count: 25,
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn report_aggregates_match_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            seeds: vec![4],
            frame_count: 20,
            output_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        run_experiment(&config).unwrap();
        let text = fs::read_to_string(dir.path().join("seed0004_fused.json")).unwrap();
        let report: TrackReport = serde_json::from_str(&text).unwrap();
        let recomputed = aggregate(&report.frames).unwrap();
        assert_abs_diff_eq!(report.aggregates.pct_5deg5cm, recomputed.pct_5deg5cm, epsilon = 1e-9);
        assert_abs_diff_eq!(report.aggregates.pct_5deg5mm, recomputed.pct_5deg5mm, epsilon = 1e-9);
        assert_abs_diff_eq!(report.aggregates.mean_rot_deg, recomputed.mean_rot_deg, epsilon = 1e-9);
        assert_abs_diff_eq!(
            report.aggregates.mean_trans_mm,
            recomputed.mean_trans_mm,
            epsilon = 1e-9
        );
        assert!((0.0..=100.0).contains(&report.aggregates.pct_5deg5cm));
        assert!((0.0..=100.0).contains(&report.aggregates.pct_5deg5mm));
        assert_eq!(report.seed, 4);
        assert_eq!(report.mode, TrackMode::Fused);
    }

    #[test]
    fn run_writes_one_report_per_cell_and_one_csv_row() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&small_config(dir.path())).unwrap();
        assert_eq!(summary.cells.len(), 6);
        assert_eq!(summary.failed, 0);
        for cell in &summary.cells {
            assert!(dir.path().join(format!("{}.json", cell.name)).exists());
        }
        let csv = fs::read_to_string(summary.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("cell,seed,mode,sweep,sweep_value,frames,"));
    }

    #[test]
    fn reruns_produce_byte_identical_csvs() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_experiment(&small_config(dir_a.path())).unwrap();
        let b = run_experiment(&small_config(dir_b.path())).unwrap();
        assert_eq!(fs::read(a.csv_path).unwrap(), fs::read(b.csv_path).unwrap());
    }

    #[test]
    fn window_sweep_multiplies_cells_and_sets_n() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            seeds: vec![0],
            modes: vec![TrackMode::Fused],
            frame_count: 20,
            sweep: Some(Sweep::WindowN(vec![3, 7])),
            output_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        let summary = run_experiment(&config).unwrap();
        assert_eq!(summary.cells.len(), 2);
        let report: TrackReport = serde_json::from_str(
            &fs::read_to_string(dir.path().join("seed0000_fused_w07.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report.tracker.window_n, 7);
    }

    #[test]
    fn position_sweep_requires_generated_data() {
        let config = ExperimentConfig {
            datasets: vec![PathBuf::from("whatever.json")],
            sweep: Some(Sweep::PositionSigmaMm(vec![0.0, 1.0])),
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            config.validate(),
            Err(ExperimentError::ConfigInvalid { field: "sweep.position_sigma_mm", .. })
        ));
    }

    #[test]
    fn failed_cells_are_recorded_and_the_run_continues() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        let spec = TrajectorySpec { frame_count: 15, ..TrajectorySpec::calibrated(9) };
        let frames = synthesize_trajectory(
            &spec,
            &ContactNoiseSpec::default(),
            Some(&HypothesisNoiseSpec::default()),
            &Pose::identity(),
        );
        write_trajectory(&good, &TrajectoryFile::from_sim_frames("good", spec.fps, &frames))
            .unwrap();
        let config = ExperimentConfig {
            datasets: vec![good, dir.path().join("missing.json")],
            modes: vec![TrackMode::Fused],
            output_dir: dir.path().join("out"),
            ..ExperimentConfig::default()
        };
        let summary = run_experiment(&config).unwrap();
        assert_eq!(summary.cells.len(), 2);
        assert_eq!(summary.failed, 1);
        assert!(summary.cells[0].error.is_none());
        assert!(summary.cells[1].error.is_some());
        let csv = fs::read_to_string(summary.csv_path).unwrap();
        let failed_row = csv.lines().last().unwrap();
        assert!(failed_row.ends_with(",failed"), "{failed_row}");
    }

    #[test]
    fn config_errors_name_the_offending_field() {
        let config = ExperimentConfig { modes: vec![], ..ExperimentConfig::default() };
        assert!(matches!(
            config.validate(),
            Err(ExperimentError::ConfigInvalid { field: "modes", .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        fs::write(&path, "{ \"seeds\": [1,\n").unwrap();
        assert!(matches!(
            load_experiment_config(&path),
            Err(ExperimentError::ConfigParse { line: 2, .. })
        ));
    }

    #[test]
    fn speed_measurement_scales_with_contact_count() {
        let spec = TrajectorySpec::calibrated(30);
        let noiseless = ContactNoiseSpec::noiseless();
        let frames = synthesize_trajectory(&spec, &noiseless, None, &Pose::identity());
        let full = TrajectoryFile::from_sim_frames("full", spec.fps, &frames);

        // Same trajectory with all but one contact dropped per frame.
        let mut single = full.clone();
        for frame in &mut single.frames {
            frame.contacts.points.truncate(1);
            frame.contacts.velocities.truncate(1);
        }

        let config = TrackerConfig::default();
        let many = measure_speed(&full, &config).unwrap();
        let one = measure_speed(&single, &config).unwrap();
        assert_eq!(many.contact_count, 16);
        assert_eq!(one.contact_count, 1);
        assert!(many.kinematics_fps > 0.0 && many.window_fps > 0.0);
        assert!(
            one.kinematics_median_ms < many.kinematics_median_ms,
            "1-contact frames ({} ms) must be faster than 16-contact frames ({} ms)",
            one.kinematics_median_ms,
            many.kinematics_median_ms
        );
    }
}
