//! On-disk interchange formats: a versioned JSON trajectory file carrying
//! ground-truth poses, contact observations and optional external pose
//! hypotheses, plus a bare pose-sequence file for tracker outputs.
//!
//! Numbers round-trip exactly: writes emit the shortest decimal that parses
//! back to the same float, so write -> read -> write is byte-identical.
//! Unknown JSON keys are ignored for forward compatibility. Reads are
//! reentrant; concurrent writes to one path are undefined.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::geom::{Pose, Rotation};
use crate::kinematics::ContactObservation;
use crate::sim::SimFrame;
use crate::tracker::{Hypothesis, HypothesisSource};

/// Version written to new files; reads reject anything else.
pub const FORMAT_VERSION: u32 = 1;

/// Stored quaternions must have norm within this tolerance of 1. Accepted
/// ones are renormalized during conversion, so hand-edited files with a few
/// digits truncated still load.
const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid data: {}", violations.join("; "))]
    Validation { violations: Vec<String> },
}

impl From<serde_json::Error> for DatasetError {
    fn from(e: serde_json::Error) -> Self {
        DatasetError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format_version: u32,
    pub object_id: String,
    pub fps: f64,
    pub frame_count: usize,
}

/// A pose as stored: unit quaternion in (w, x, y, z) order and position in
/// meters. Raw floats, exactly as read; conversion to [`Pose`] renormalizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub q: [f64; 4],
    pub p: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(pose: &Pose) -> Self {
        PoseRecord { q: pose.rotation.to_unit_quaternion(), p: pose.translation.into() }
    }

    pub fn to_pose(&self) -> Pose {
        Pose::new(Rotation::from_unit_quaternion(self.q), Vector3::from(self.p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactsRecord {
    pub points: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub q: [f64; 4],
    pub p: [f64; 3],
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// Timestamp in seconds; strictly increasing across frames.
    pub t: f64,
    pub gt_pose: PoseRecord,
    pub contacts: ContactsRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub frames: Vec<FrameRecord>,
}

fn quat_norm_error(q: &[f64; 4]) -> Option<f64> {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    ((n - 1.0).abs() > UNIT_NORM_TOLERANCE).then_some(n)
}

impl TrajectoryFile {
    /// Packages a synthesized trajectory for writing.
    pub fn from_sim_frames(object_id: impl Into<String>, fps: f64, frames: &[SimFrame]) -> Self {
        let records = frames
            .iter()
            .map(|f| FrameRecord {
                t: f.timestamp,
                gt_pose: PoseRecord::from_pose(&f.pose),
                contacts: ContactsRecord {
                    points: f.contacts.points.iter().map(|p| (*p).into()).collect(),
                    velocities: f.contacts.velocities.iter().map(|v| (*v).into()).collect(),
                },
                hypothesis: f.hypothesis.map(|h| HypothesisRecord {
                    q: h.pose.rotation.to_unit_quaternion(),
                    p: h.pose.translation.into(),
                    confidence: h.confidence,
                }),
            })
            .collect();
        TrajectoryFile {
            header: TrajectoryHeader {
                format_version: FORMAT_VERSION,
                object_id: object_id.into(),
                fps,
                frame_count: frames.len(),
            },
            frames: records,
        }
    }

    /// Checks every invariant and reports all violations at once, so a bad
    /// file can be fixed in one pass.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut violations = Vec::new();
        if self.header.format_version != FORMAT_VERSION {
            violations.push(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.header.format_version
            ));
        }
        if !self.header.fps.is_finite() || self.header.fps <= 0.0 {
            violations.push(format!("fps must be finite and positive, got {}", self.header.fps));
        }
        if self.header.frame_count != self.frames.len() {
            violations.push(format!(
                "header frame_count {} but {} frames present",
                self.header.frame_count,
                self.frames.len()
            ));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if let Some(n) = quat_norm_error(&frame.gt_pose.q) {
                violations
                    .push(format!("frame {i}: gt_pose quaternion norm {n} is not 1 within 1e-6"));
            }
            if frame.contacts.points.len() != frame.contacts.velocities.len() {
                violations.push(format!(
                    "frame {i}: {} contact points but {} velocities",
                    frame.contacts.points.len(),
                    frame.contacts.velocities.len()
                ));
            }
            if let Some(h) = &frame.hypothesis {
                if let Some(n) = quat_norm_error(&h.q) {
                    violations.push(format!(
                        "frame {i}: hypothesis quaternion norm {n} is not 1 within 1e-6"
                    ));
                }
                if !h.confidence.is_finite() || h.confidence < 0.0 {
                    violations.push(format!(
                        "frame {i}: hypothesis confidence {} must be finite and non-negative",
                        h.confidence
                    ));
                }
            }
            if i > 0 && frame.t <= self.frames[i - 1].t {
                violations.push(format!(
                    "frame {i}: timestamp {} does not increase over {}",
                    frame.t,
                    self.frames[i - 1].t
                ));
            }
            let numbers = std::iter::once(frame.t)
                .chain(frame.gt_pose.q)
                .chain(frame.gt_pose.p)
                .chain(frame.contacts.points.iter().flatten().copied())
                .chain(frame.contacts.velocities.iter().flatten().copied())
                .chain(frame.hypothesis.iter().flat_map(|h| h.q.into_iter().chain(h.p)));
            if numbers.into_iter().any(|v| !v.is_finite()) {
                violations.push(format!("frame {i}: contains a non-finite number"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Validation { violations })
        }
    }

    pub fn gt_poses(&self) -> Vec<Pose> {
        self.frames.iter().map(|f| f.gt_pose.to_pose()).collect()
    }

    /// Timestamped contact observations in the shape the trackers consume.
    /// Fails if any frame has zero contacts, which the file format permits
    /// but the estimator cannot use.
    pub fn contact_frames(&self) -> Result<Vec<(f64, ContactObservation)>, DatasetError> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, frame)| {
                let points = frame.contacts.points.iter().map(|&p| Vector3::from(p)).collect();
                let velocities =
                    frame.contacts.velocities.iter().map(|&v| Vector3::from(v)).collect();
                ContactObservation::new(points, velocities)
                    .map(|obs| (frame.t, obs))
                    .map_err(|e| DatasetError::Validation { violations: vec![format!("frame {i}: {e}")] })
            })
            .collect()
    }
}

/// Replays the stored hypothesis channel: frames without one yield `None`,
/// so a trajectory file plugs directly into the fused tracker.
impl HypothesisSource for TrajectoryFile {
    fn hypothesis(&self, frame_index: usize) -> Option<Hypothesis> {
        self.frames.get(frame_index)?.hypothesis.as_ref().map(|h| Hypothesis {
            pose: Pose::new(Rotation::from_unit_quaternion(h.q), Vector3::from(h.p)),
            confidence: h.confidence,
        })
    }
}

/// Bare pose sequence, the format `track` writes and `eval` compares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub poses: Vec<PoseRecord>,
}

impl PoseFile {
    pub fn from_poses(poses: &[Pose]) -> Self {
        PoseFile { poses: poses.iter().map(PoseRecord::from_pose).collect() }
    }

    pub fn to_poses(&self) -> Vec<Pose> {
        self.poses.iter().map(PoseRecord::to_pose).collect()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut violations = Vec::new();
        for (i, pose) in self.poses.iter().enumerate() {
            if let Some(n) = quat_norm_error(&pose.q) {
                violations.push(format!("pose {i}: quaternion norm {n} is not 1 within 1e-6"));
            }
            if pose.q.iter().chain(&pose.p).any(|v| !v.is_finite()) {
                violations.push(format!("pose {i}: contains a non-finite number"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Validation { violations })
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_trajectory(path: impl AsRef<Path>, data: &TrajectoryFile) -> Result<(), DatasetError> {
    data.validate()?;
    write_json(path.as_ref(), data)
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryFile, DatasetError> {
    let text = fs::read_to_string(path)?;
    let file: TrajectoryFile = serde_json::from_str(&text)?;
    file.validate()?;
    Ok(file)
}

pub fn write_poses(path: impl AsRef<Path>, data: &PoseFile) -> Result<(), DatasetError> {
    data.validate()?;
    write_json(path.as_ref(), data)
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<PoseFile, DatasetError> {
    let text = fs::read_to_string(path)?;
    let file: PoseFile = serde_json::from_str(&text)?;
    file.validate()?;
    Ok(file)
}

/// Reads a pose track from either file type: a trajectory file contributes
/// its ground-truth poses, a pose file its sequence. The two are told apart
/// by the presence of the `header` key.
pub fn read_pose_track(path: impl AsRef<Path>) -> Result<Vec<Pose>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("header").is_some() {
        let file: TrajectoryFile = serde_json::from_value(value)?;
        file.validate()?;
        Ok(file.gt_poses())
    } else {
        let file: PoseFile = serde_json::from_value(value)?;
        file.validate()?;
        Ok(file.to_poses())
    }
}
