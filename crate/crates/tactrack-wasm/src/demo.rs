//! The computations behind the demo page: synthesize seeded trajectories,
//! run the tracker, and package drawable curves. Everything is JSON-string
//! in, JSON-string out, so the wasm layer stays a one-line wrapper and the
//! logic runs (and is tested) on any target.

use serde::{Deserialize, Serialize};

use tactrack::geom::Pose;
use tactrack::kinematics::ContactObservation;
use tactrack::metrics::{aggregate, frame_errors, MetricAggregates};
use tactrack::sim::{
    synthesize_trajectory, ContactNoiseSpec, HypothesisNoiseSpec, TrajectorySpec,
};
use tactrack::tracker::{track_fused, Hypothesis, TrackMode, TrackerConfig};

/// Knobs shared by all demo operations. Sigmas are in display units (the
/// page works in degrees and millimeters); seeds pick the trajectory shape
/// and all noise draws.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub seed: u64,
    pub frame_count: usize,
    pub window_n: usize,
    pub hypothesis_rotation_sigma_deg: f64,
    pub hypothesis_translation_sigma_mm: f64,
    pub outlier_probability: f64,
    pub position_sigma_mm: f64,
    pub motion_scale: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 0,
            frame_count: 100,
            window_n: 5,
            hypothesis_rotation_sigma_deg: 5.0,
            hypothesis_translation_sigma_mm: 5.0,
            outlier_probability: 0.0,
            position_sigma_mm: 1.0,
            motion_scale: 1.0,
        }
    }
}

impl DemoConfig {
    fn validate(&self) -> Result<(), String> {
        let bounds: [(&str, f64, f64, f64); 6] = [
            ("frame_count", self.frame_count as f64, 2.0, 2000.0),
            ("window_n", self.window_n as f64, 1.0, 50.0),
            ("hypothesis_rotation_sigma_deg", self.hypothesis_rotation_sigma_deg, 0.0, 90.0),
            ("hypothesis_translation_sigma_mm", self.hypothesis_translation_sigma_mm, 0.0, 100.0),
            ("position_sigma_mm", self.position_sigma_mm, 0.0, 50.0),
            ("motion_scale", self.motion_scale, 0.1, 10.0),
        ];
        for (field, value, lo, hi) in bounds {
            if !value.is_finite() || value < lo || value > hi {
                return Err(format!("{field} must be in [{lo}, {hi}], got {value}"));
            }
        }
        if !(0.0..=1.0).contains(&self.outlier_probability) {
            return Err(format!(
                "outlier_probability must be in [0, 1], got {}",
                self.outlier_probability
            ));
        }
        Ok(())
    }
}

struct Cell {
    timestamps: Vec<f64>,
    frames: Vec<(f64, ContactObservation)>,
    hypotheses: Vec<Option<Hypothesis>>,
    ground_truth: Vec<Pose>,
}

fn build_cell(config: &DemoConfig) -> Cell {
    let mut spec = TrajectorySpec {
        frame_count: config.frame_count,
        ..TrajectorySpec::calibrated(config.seed)
    };
    for s in spec.linear.iter_mut().chain(spec.angular.iter_mut()) {
        s.amplitude *= config.motion_scale;
    }
    let contact = ContactNoiseSpec {
        position_sigma: config.position_sigma_mm * 1e-3,
        seed: config.seed.wrapping_add(1000),
        ..ContactNoiseSpec::default()
    };
    let hypothesis = HypothesisNoiseSpec {
        rotation_sigma: config.hypothesis_rotation_sigma_deg.to_radians(),
        translation_sigma: config.hypothesis_translation_sigma_mm * 1e-3,
        outlier_probability: config.outlier_probability,
        outlier_scale: 10.0,
        seed: config.seed.wrapping_add(2000),
    };
    let sim = synthesize_trajectory(&spec, &contact, Some(&hypothesis), &Pose::identity());
    Cell {
        timestamps: sim.iter().map(|f| f.timestamp).collect(),
        frames: sim.iter().map(|f| (f.timestamp, f.contacts.clone())).collect(),
        hypotheses: sim.iter().map(|f| f.hypothesis).collect(),
        ground_truth: sim.iter().map(|f| f.pose).collect(),
    }
}

fn run_mode(cell: &Cell, mode: TrackMode, window_n: usize) -> Result<ModeTrack, String> {
    let config = TrackerConfig { mode, window_n, ..TrackerConfig::default() };
    let estimates = track_fused(&cell.frames, &cell.hypotheses, &cell.ground_truth[0], &config)
        .map_err(|e| e.to_string())?;
    let errors = frame_errors(&estimates, &cell.ground_truth).map_err(|e| e.to_string())?;
    let aggregates = aggregate(&errors).map_err(|e| e.to_string())?;
    Ok(ModeTrack {
        rotation_deg: errors.iter().map(|e| e.rotation_deg).collect(),
        translation_mm: errors.iter().map(|e| e.translation_mm).collect(),
        aggregates,
        path_mm: estimates.iter().map(path_point).collect(),
    })
}

fn path_point(pose: &Pose) -> [f64; 2] {
    [pose.translation.x * 1e3, pose.translation.y * 1e3]
}

fn parse<'a, T: Deserialize<'a>>(config: &'a str) -> Result<T, String> {
    serde_json::from_str(config).map_err(|e| format!("config: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo results serialize")
}

#[derive(Debug, Serialize)]
pub struct ModeTrack {
    pub rotation_deg: Vec<f64>,
    pub translation_mm: Vec<f64>,
    pub aggregates: MetricAggregates,
    pub path_mm: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct CompareResult {
    pub timestamps: Vec<f64>,
    pub gt_path_mm: Vec<[f64; 2]>,
    pub fused: ModeTrack,
    pub visual_only: ModeTrack,
    pub kinematics_only: ModeTrack,
}

/// One trajectory, all three modes: paths for the top-view canvas plus
/// per-frame error curves and aggregates.
pub fn compare_modes(config: &str) -> Result<String, String> {
    let config: DemoConfig = parse(config)?;
    config.validate()?;
    let cell = build_cell(&config);
    let result = CompareResult {
        gt_path_mm: cell.ground_truth.iter().map(path_point).collect(),
        fused: run_mode(&cell, TrackMode::Fused, config.window_n)?,
        visual_only: run_mode(&cell, TrackMode::VisualOnly, config.window_n)?,
        kinematics_only: run_mode(&cell, TrackMode::KinematicsOnly, config.window_n)?,
        timestamps: cell.timestamps,
    };
    Ok(to_json(&result))
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct WindowSweepConfig {
    #[serde(flatten)]
    pub base: DemoConfig,
    pub seeds: Vec<u64>,
    pub window_values: Vec<usize>,
}

impl Default for WindowSweepConfig {
    fn default() -> Self {
        WindowSweepConfig {
            base: DemoConfig::default(),
            seeds: vec![0, 1, 2],
            window_values: vec![3, 5, 7, 10, 15, 20],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct WindowSweepPoint {
    pub window_n: usize,
    pub mean_rot_deg: f64,
    pub mean_trans_mm: f64,
}

/// Fused error vs sliding-window length, averaged over the seeds.
pub fn window_sweep(config: &str) -> Result<String, String> {
    let config: WindowSweepConfig = parse(config)?;
    config.base.validate()?;
    if config.seeds.is_empty() || config.window_values.is_empty() {
        return Err("seeds and window_values must be non-empty".to_string());
    }
    let cells: Vec<Cell> = config
        .seeds
        .iter()
        .map(|&seed| build_cell(&DemoConfig { seed, ..config.base }))
        .collect();
    let mut points = Vec::with_capacity(config.window_values.len());
    for &window_n in &config.window_values {
        let mut rot = 0.0;
        let mut trans = 0.0;
        for cell in &cells {
            let track = run_mode(cell, TrackMode::Fused, window_n)?;
            rot += track.aggregates.mean_rot_deg;
            trans += track.aggregates.mean_trans_mm;
        }
        let n = cells.len() as f64;
        points.push(WindowSweepPoint {
            window_n,
            mean_rot_deg: rot / n,
            mean_trans_mm: trans / n,
        });
    }
    Ok(to_json(&serde_json::json!({ "points": points })))
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct NoiseSweepConfig {
    #[serde(flatten)]
    pub base: DemoConfig,
    pub seeds: Vec<u64>,
    pub sigmas_mm: Vec<f64>,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        NoiseSweepConfig {
            base: DemoConfig::default(),
            seeds: vec![0, 1],
            sigmas_mm: vec![0.0, 1.0, 2.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorPair {
    pub mean_rot_deg: f64,
    pub mean_trans_mm: f64,
}

#[derive(Debug, Serialize)]
pub struct NoiseSweepPoint {
    pub position_sigma_mm: f64,
    pub fused: ErrorPair,
    pub kinematics_only: ErrorPair,
}

/// Fused vs kinematics-only error as contact position noise grows,
/// averaged over the seeds.
pub fn noise_sweep(config: &str) -> Result<String, String> {
    let config: NoiseSweepConfig = parse(config)?;
    config.base.validate()?;
    if config.seeds.is_empty() || config.sigmas_mm.is_empty() {
        return Err("seeds and sigmas_mm must be non-empty".to_string());
    }
    let mut points = Vec::with_capacity(config.sigmas_mm.len());
    for &sigma_mm in &config.sigmas_mm {
        if !sigma_mm.is_finite() || !(0.0..=50.0).contains(&sigma_mm) {
            return Err(format!("sigmas_mm entries must be in [0, 50], got {sigma_mm}"));
        }
        let mut sums = [0.0; 4];
        for &seed in &config.seeds {
            let cell = build_cell(&DemoConfig {
                seed,
                position_sigma_mm: sigma_mm,
                ..config.base
            });
            let fused = run_mode(&cell, TrackMode::Fused, config.base.window_n)?;
            let kin = run_mode(&cell, TrackMode::KinematicsOnly, config.base.window_n)?;
            sums[0] += fused.aggregates.mean_rot_deg;
            sums[1] += fused.aggregates.mean_trans_mm;
            sums[2] += kin.aggregates.mean_rot_deg;
            sums[3] += kin.aggregates.mean_trans_mm;
        }
        let n = config.seeds.len() as f64;
        points.push(NoiseSweepPoint {
            position_sigma_mm: sigma_mm,
            fused: ErrorPair { mean_rot_deg: sums[0] / n, mean_trans_mm: sums[1] / n },
            kinematics_only: ErrorPair { mean_rot_deg: sums[2] / n, mean_trans_mm: sums[3] / n },
        });
    }
    Ok(to_json(&serde_json::json!({ "points": points })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_runs_the_default_comparison() {
        let out = compare_modes("{}").unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["timestamps"].as_array().unwrap().len(), 100);
        assert_eq!(v["gt_path_mm"].as_array().unwrap().len(), 100);
        for mode in ["fused", "visual_only", "kinematics_only"] {
            assert_eq!(v[mode]["rotation_deg"].as_array().unwrap().len(), 100);
            assert_eq!(v[mode]["path_mm"].as_array().unwrap().len(), 100);
            let pct = v[mode]["aggregates"]["pct_5deg5cm"].as_f64().unwrap();
            assert!((0.0..=100.0).contains(&pct));
        }
    }

    #[test]
    fn identical_configs_give_identical_output_strings() {
        let config = r#"{ "seed": 7, "frame_count": 40 }"#;
        assert_eq!(compare_modes(config).unwrap(), compare_modes(config).unwrap());
    }

    #[test]
    fn fusion_beats_visual_only_on_the_default_demo() {
        let out = compare_modes("{}").unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let trans = |mode: &str| v[mode]["aggregates"]["mean_trans_mm"].as_f64().unwrap();
        let rot = |mode: &str| v[mode]["aggregates"]["mean_rot_deg"].as_f64().unwrap();
        assert!(trans("fused") < trans("visual_only"));
        assert!(rot("fused") < rot("visual_only"));
    }

    #[test]
    fn window_sweep_returns_one_point_per_value() {
        let out = window_sweep(
            r#"{ "frame_count": 30, "seeds": [0], "window_values": [3, 5, 9] }"#,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let points = v["points"].as_array().unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(points[2]["window_n"], 9);
        assert!(points[0]["mean_trans_mm"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn noise_sweep_returns_both_curves() {
        let out = noise_sweep(
            r#"{ "frame_count": 30, "seeds": [0], "sigmas_mm": [0.0, 5.0] }"#,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let points = v["points"].as_array().unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1]["position_sigma_mm"], 5.0);
        assert!(points[0]["fused"]["mean_rot_deg"].as_f64().unwrap() > 0.0);
        assert!(points[0]["kinematics_only"]["mean_trans_mm"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn malformed_json_is_reported_as_a_config_error() {
        let err = compare_modes("{ not json").unwrap_err();
        assert!(err.starts_with("config:"), "{err}");
    }

    #[test]
    fn out_of_range_fields_are_named() {
        let err = compare_modes(r#"{ "frame_count": 1 }"#).unwrap_err();
        assert!(err.contains("frame_count"), "{err}");
        let err = compare_modes(r#"{ "window_n": 0 }"#).unwrap_err();
        assert!(err.contains("window_n"), "{err}");
        let err = window_sweep(r#"{ "window_values": [] }"#).unwrap_err();
        assert!(err.contains("window_values"), "{err}");
    }
}
