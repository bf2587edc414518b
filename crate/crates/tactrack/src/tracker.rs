//! Online pose tracking: twist integration, the kinematics-only
//! dead-reckoning baseline, and the sliding-window optimizer that reconciles
//! the integrated chain with external pose hypotheses.
//!
//! The window optimizer treats the oldest pose in the window as the only
//! free variable; every later pose follows rigidly from it by integrating
//! the stored per-frame twists. Minimizing the weighted disagreement with
//! the hypotheses therefore shifts the whole chain at once, and the
//! rewritten poses carry forward into subsequent frames.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{chordal_sq, rotation_exp, so3_left_jacobian, Pose, Rotation, Twist};
use crate::kinematics::{estimate_kinematics, ContactObservation, KinematicsError};
use crate::optim::{decay_schedule, minimize_scheduled, OptimError, OptimizerConfig};

/// How the tracker combines its two information sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackMode {
    /// Integrate tactile twist estimates only; drifts without bounds.
    KinematicsOnly,
    /// Emit the raw pose hypotheses, coasting on the last one through gaps.
    VisualOnly,
    /// Sliding-window fusion of the kinematic chain with the hypotheses.
    Fused,
}

/// Pose hypothesis for one frame from an external source, weighted by how
/// much the window energy should trust it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub pose: Pose,
    pub confidence: f64,
}

/// Anything that can be asked for a pose hypothesis at a frame index.
/// `None` models a dropout of the external tracker at that frame.
pub trait HypothesisSource {
    fn hypothesis(&self, frame_index: usize) -> Option<Hypothesis>;
}

impl HypothesisSource for Vec<Option<Hypothesis>> {
    fn hypothesis(&self, frame_index: usize) -> Option<Hypothesis> {
        self.get(frame_index).copied().flatten()
    }
}

/// Tracker tuning: window length, the two disagreement scales, the
/// optimizer budget, and the mode.
///
/// `lambda_t` and `lambda_r` put translation and rotation error on a common
/// scale; the defaults equate 1 cm of translation with the chordal distance
/// of roughly a 4 degree rotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub window_n: usize,
    /// Translation scale in meters.
    pub lambda_t: f64,
    /// Dimensionless chordal-distance scale.
    pub lambda_r: f64,
    pub optimizer: OptimizerConfig,
    pub mode: TrackMode,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            window_n: 5,
            lambda_t: 0.01,
            lambda_r: 0.1,
            optimizer: OptimizerConfig::default(),
            mode: TrackMode::Fused,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrackError {
    /// Fused tracking needs at least one hypothesis inside the first window
    /// to anchor against; with none it would silently degenerate into
    /// kinematics-only tracking.
    #[error("no pose hypothesis in any of the first {window_n} frames")]
    MissingInitialHypothesisWindow { window_n: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Optimizer(#[from] OptimError),
}

/// One frame's worth of state inside the sliding window.
#[derive(Debug, Clone)]
pub struct WindowFrame {
    /// Sample time in seconds.
    pub timestamp: f64,
    /// Twist over the interval ending at this frame, with `linear`
    /// referenced at the tracked object origin.
    pub twist: Twist,
    /// External pose hypothesis for this frame, if the source had one.
    pub hypothesis: Option<Hypothesis>,
    /// Current pose estimate; rewritten by [`window_optimize`].
    pub pose: Pose,
}

/// Ring buffer of the most recent frames, oldest first.
#[derive(Debug, Clone)]
pub struct WindowState {
    capacity: usize,
    frames: VecDeque<WindowFrame>,
}

impl WindowState {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        WindowState { capacity, frames: VecDeque::with_capacity(capacity) }
    }

    /// Appends a frame, evicting the oldest one once the buffer is full.
    /// Panics unless the timestamp strictly increases.
    pub fn push(&mut self, frame: WindowFrame) {
        if let Some(last) = self.frames.back() {
            assert!(
                frame.timestamp > last.timestamp,
                "frame timestamps must strictly increase"
            );
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &WindowFrame> {
        self.frames.iter()
    }

    fn first(&self) -> &WindowFrame {
        self.frames.front().expect("window is non-empty")
    }
}

/// Advances a pose by one twist over `dt` seconds: the translation moves by
/// `linear * dt` and the rotation is pre-multiplied by
/// `exp([angular * dt]x)`. `twist.linear` must be referenced at the object
/// origin being tracked.
pub fn integrate_pose(prev: &Pose, twist: &Twist, dt: f64) -> Pose {
    assert!(dt > 0.0, "integration interval must be positive");
    Pose::new(
        rotation_exp(&(twist.angular * dt)).compose(&prev.rotation),
        prev.translation + twist.linear * dt,
    )
}

/// Squared pose discrepancy on the window's common scale.
fn e_geo(pose: &Pose, hyp: &Pose, lambda_t: f64, lambda_r: f64) -> f64 {
    (pose.translation - hyp.translation).norm_squared() / (lambda_t * lambda_t)
        + chordal_sq(&pose.rotation, &hyp.rotation) / (lambda_r * lambda_r)
}

/// Poses for every window frame, chained forward from `first_pose` with the
/// stored twists and inter-frame intervals. The first frame takes
/// `first_pose` itself; its own twist belongs to the interval before the
/// window and is not applied.
fn chain_from(state: &WindowState, first_pose: &Pose) -> Vec<Pose> {
    let mut poses: Vec<Pose> = Vec::with_capacity(state.len());
    let mut prev_ts = f64::NAN;
    for frame in state.frames() {
        let pose = match poses.last() {
            None => *first_pose,
            Some(prev) => integrate_pose(prev, &frame.twist, frame.timestamp - prev_ts),
        };
        prev_ts = frame.timestamp;
        poses.push(pose);
    }
    poses
}

/// Total weighted disagreement between the chain anchored at `first_pose`
/// and the stored hypotheses. Frames without a hypothesis contribute
/// nothing, which lets the tracker coast on kinematics through dropouts.
pub fn window_energy(state: &WindowState, first_pose: &Pose, config: &TrackerConfig) -> f64 {
    assert!(!state.is_empty(), "window must be non-empty");
    chain_from(state, first_pose)
        .iter()
        .zip(state.frames())
        .map(|(pose, frame)| match &frame.hypothesis {
            Some(h) => h.confidence * e_geo(pose, &h.pose, config.lambda_t, config.lambda_r),
            None => 0.0,
        })
        .sum()
}

/// The window objective in the whitened coordinates the optimizer works in.
///
/// The free state `y` splits as `(translation offset / lambda_t, axis-angle
/// perturbation * sqrt(2) / lambda_r)` about the window's current first
/// pose `(R0, t0)`; the candidate first pose is `(exp([delta]x) R0,
/// t0 + u)`. That scaling gives both blocks unit curvature per hypothesis,
/// so one learning rate suits all six coordinates.
pub struct WindowProblem<'a> {
    state: &'a WindowState,
    anchor: Pose,
    lambda_t: f64,
    lambda_r: f64,
}

impl<'a> WindowProblem<'a> {
    pub fn new(state: &'a WindowState, config: &TrackerConfig) -> Self {
        assert!(!state.is_empty(), "window must be non-empty");
        WindowProblem {
            state,
            anchor: state.first().pose,
            lambda_t: config.lambda_t,
            lambda_r: config.lambda_r,
        }
    }

    fn split(&self, y: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        let u = Vector3::new(y[0], y[1], y[2]) * self.lambda_t;
        let delta = Vector3::new(y[3], y[4], y[5]) * (self.lambda_r / SQRT_2);
        (u, delta)
    }

    /// First-frame pose encoded by the whitened state `y`.
    pub fn first_pose(&self, y: &[f64]) -> Pose {
        let (u, delta) = self.split(y);
        Pose::new(
            rotation_exp(&delta).compose(&self.anchor.rotation),
            self.anchor.translation + u,
        )
    }

    /// Window energy at `y`.
    pub fn energy(&self, y: &[f64]) -> f64 {
        let first = self.first_pose(y);
        chain_from(self.state, &first)
            .iter()
            .zip(self.state.frames())
            .map(|(pose, frame)| match &frame.hypothesis {
                Some(h) => h.confidence * e_geo(pose, &h.pose, self.lambda_t, self.lambda_r),
                None => 0.0,
            })
            .sum()
    }

    /// Analytic gradient of [`Self::energy`] at `y`.
    ///
    /// The chain separates: translations depend only on `u` (linearly) and
    /// rotations only on `delta`, with frame `i`'s rotation factoring as
    /// `Q_i exp([delta]x) R0` where `Q_i` chains the stored angular
    /// increments. Differentiating the chordal term through the left
    /// Jacobian of `delta` gives, per hypothesis frame,
    /// `2 c / lambda_r^2 * J_l(delta)^T tau(Q_i^T H_i R0^T E^T)` with
    /// `tau(M) = (M_23 - M_32, M_31 - M_13, M_12 - M_21)`.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let (u, delta) = self.split(y);
        let e_rot_t = rotation_exp(&delta).transposed();
        let r0_t = self.anchor.rotation.transposed();
        let lt2 = self.lambda_t * self.lambda_t;
        let lr2 = self.lambda_r * self.lambda_r;

        let mut g_u = Vector3::zeros();
        let mut g_delta = Vector3::zeros();
        let mut t = self.anchor.translation + u;
        let mut q_t = Rotation::identity();
        let mut prev_ts = f64::NAN;
        for (i, frame) in self.state.frames().enumerate() {
            if i > 0 {
                let dt = frame.timestamp - prev_ts;
                t += frame.twist.linear * dt;
                q_t = q_t.compose(&rotation_exp(&(frame.twist.angular * -dt)));
            }
            prev_ts = frame.timestamp;
            if let Some(h) = &frame.hypothesis {
                g_u += (t - h.pose.translation) * (2.0 * h.confidence / lt2);
                let m = q_t.matrix() * h.pose.rotation.matrix() * r0_t.matrix() * e_rot_t.matrix();
                let tau = Vector3::new(
                    m[(1, 2)] - m[(2, 1)],
                    m[(2, 0)] - m[(0, 2)],
                    m[(0, 1)] - m[(1, 0)],
                );
                g_delta += tau * (2.0 * h.confidence / lr2);
            }
        }
        g_delta = so3_left_jacobian(&delta).transpose() * g_delta;

        let su = self.lambda_t;
        let sd = self.lambda_r / SQRT_2;
        vec![g_u.x * su, g_u.y * su, g_u.z * su, g_delta.x * sd, g_delta.y * sd, g_delta.z * sd]
    }
}

/// Optimizes the window's first pose against the hypotheses, re-chains, and
/// rewrites every stored pose. Returns the updated poses, oldest first.
pub fn window_optimize(
    state: &mut WindowState,
    config: &TrackerConfig,
) -> Result<Vec<Pose>, OptimError> {
    let problem = WindowProblem::new(state, config);
    let objective = |y: &[f64]| problem.energy(y);
    let gradient = |y: &[f64]| problem.gradient(y);
    let stages = decay_schedule(config.optimizer.learning_rate, config.optimizer.max_iterations);
    let best = minimize_scheduled(&objective, Some(&gradient), &[0.0; 6], &stages, &config.optimizer)?;

    // y = 0 means the anchor did not move. The stored poses already chain
    // rigidly from it (pushes extend the chain, evictions shorten it), so
    // rewriting would only churn low bits.
    let poses: Vec<Pose> = if best.x.iter().all(|v| *v == 0.0) {
        state.frames().map(|f| f.pose).collect()
    } else {
        chain_from(state, &problem.first_pose(&best.x))
    };
    for (frame, pose) in state.frames.iter_mut().zip(&poses) {
        frame.pose = *pose;
    }
    Ok(poses)
}

/// Pure tactile dead-reckoning: per frame, estimate the twist from the
/// contact observation (rotation-center search started at the current
/// translation estimate), transport it to the object origin, and integrate.
/// The first frame reports `initial_pose` itself; its twist has no
/// preceding interval to act on.
pub fn track_kinematics_only(
    frames: &[(f64, ContactObservation)],
    initial_pose: &Pose,
) -> Result<Vec<Pose>, KinematicsError> {
    let mut poses = Vec::with_capacity(frames.len());
    let mut current = *initial_pose;
    let mut prev_ts: Option<f64> = None;
    for (timestamp, obs) in frames {
        let estimate = estimate_kinematics(obs, &current.translation)?;
        if let Some(prev) = prev_ts {
            let twist = estimate.twist.transported(&estimate.center, &current.translation);
            current = integrate_pose(&current, &twist, timestamp - prev);
        }
        prev_ts = Some(*timestamp);
        poses.push(current);
    }
    Ok(poses)
}

/// Full tracking entry point, dispatching on `config.mode`.
///
/// In fused mode every frame estimates a twist, pushes it into the window
/// together with the frame's hypothesis, optimizes the window, and emits
/// the newest rewritten pose. While fewer than `window_n` frames have
/// arrived the window is simply shorter, so fusion starts immediately.
pub fn track_fused(
    frames: &[(f64, ContactObservation)],
    hypotheses: &dyn HypothesisSource,
    initial_pose: &Pose,
    config: &TrackerConfig,
) -> Result<Vec<Pose>, TrackError> {
    match config.mode {
        TrackMode::KinematicsOnly => {
            return Ok(track_kinematics_only(frames, initial_pose)?);
        }
        TrackMode::VisualOnly => {
            let mut current = *initial_pose;
            return Ok((0..frames.len())
                .map(|k| {
                    if let Some(h) = hypotheses.hypothesis(k) {
                        current = h.pose;
                    }
                    current
                })
                .collect());
        }
        TrackMode::Fused => {}
    }

    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let probe = frames.len().min(config.window_n);
    if (0..probe).all(|k| hypotheses.hypothesis(k).is_none()) {
        return Err(TrackError::MissingInitialHypothesisWindow { window_n: config.window_n });
    }

    let mut window = WindowState::new(config.window_n);
    let mut poses = Vec::with_capacity(frames.len());
    let mut current = *initial_pose;
    let mut prev_ts: Option<f64> = None;
    for (k, (timestamp, obs)) in frames.iter().enumerate() {
        let estimate = estimate_kinematics(obs, &current.translation)?;
        let twist = estimate.twist.transported(&estimate.center, &current.translation);
        let provisional = match prev_ts {
            None => *initial_pose,
            Some(prev) => integrate_pose(&current, &twist, timestamp - prev),
        };
        prev_ts = Some(*timestamp);
        window.push(WindowFrame {
            timestamp: *timestamp,
            twist,
            hypothesis: hypotheses.hypothesis(k),
            pose: provisional,
        });
        let updated = window_optimize(&mut window, config)?;
        current = *updated.last().expect("window is non-empty");
        poses.push(current);
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::geodesic_angle;
    use crate::optim::gradient_check;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::FRAC_PI_2;

    const FPS_DT: f64 = 1.0 / 30.0;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis_angle = random_unit(rng) * rng.random_range(0.0..2.0);
        let t = Vector3::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        );
        Pose::new(rotation_exp(&axis_angle), t)
    }

    fn random_twist(rng: &mut ChaCha8Rng) -> Twist {
        Twist::new(random_unit(rng) * rng.random_range(0.0..0.05), random_unit(rng) * rng.random_range(0.0..0.5))
    }

    /// Truth chain of `n` poses from seeded twists, all twists referenced at
    /// the object origin, plus the per-frame timestamps.
    fn truth_chain(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<Twist>, Vec<Pose>) {
        let mut poses = vec![random_pose(rng)];
        let mut twists = vec![Twist::zero()];
        let mut timestamps = vec![0.0];
        for i in 1..n {
            let twist = random_twist(rng);
            let pose = integrate_pose(&poses[i - 1], &twist, FPS_DT);
            twists.push(twist);
            timestamps.push(i as f64 * FPS_DT);
            poses.push(pose);
        }
        (timestamps, twists, poses)
    }

    fn window_from(
        timestamps: &[f64],
        twists: &[Twist],
        stored: &[Pose],
        hyps: &[Option<Hypothesis>],
    ) -> WindowState {
        let mut state = WindowState::new(timestamps.len());
        for i in 0..timestamps.len() {
            state.push(WindowFrame {
                timestamp: timestamps[i],
                twist: twists[i],
                hypothesis: hyps[i],
                pose: stored[i],
            });
        }
        state
    }

    fn exact_hyps(poses: &[Pose]) -> Vec<Option<Hypothesis>> {
        poses.iter().map(|p| Some(Hypothesis { pose: *p, confidence: 1.0 })).collect()
    }

    /// Eight box corners used as contact points.
    fn body_points() -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for &x in &[-0.02, 0.02] {
            for &y in &[-0.02, 0.02] {
                for &z in &[-0.02, 0.02] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        pts
    }

    /// Contact observation sampling the rigid velocity field of `twist`
    /// (referenced at `reference`) at the body points mapped through `pose`.
    fn observe(pose: &Pose, twist: &Twist, reference: &Vector3<f64>) -> ContactObservation {
        let points: Vec<_> = body_points().iter().map(|b| pose.transform_point(b)).collect();
        let velocities: Vec<_> = points.iter().map(|p| twist.velocity_at(p, reference)).collect();
        ContactObservation::new(points, velocities).unwrap()
    }

    #[test]
    fn integrate_zero_twist_is_identity_step() {
        let pose = Pose::new(rotation_exp(&Vector3::new(0.1, -0.2, 0.3)), Vector3::new(1.0, 2.0, 3.0));
        let next = integrate_pose(&pose, &Twist::zero(), 0.5);
        assert_abs_diff_eq!(next.translation, pose.translation, epsilon = 1e-15);
        assert!(geodesic_angle(&next.rotation, &pose.rotation) < 1e-15);
    }

    #[test]
    fn integrate_pure_translation() {
        let next = integrate_pose(
            &Pose::identity(),
            &Twist::new(Vector3::x(), Vector3::zeros()),
            0.1,
        );
        assert_abs_diff_eq!(next.translation, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(next.rotation.matrix(), &Matrix3::identity());
    }

    #[test]
    fn integrate_quarter_turn() {
        let next = integrate_pose(
            &Pose::identity(),
            &Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, FRAC_PI_2)),
            1.0,
        );
        assert_abs_diff_eq!(next.rotation.rotate(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "positive")]
    fn integrate_rejects_zero_dt() {
        integrate_pose(&Pose::identity(), &Twist::zero(), 0.0);
    }

    #[test]
    fn window_push_evicts_and_rejects_stale_timestamps() {
        let mut state = WindowState::new(2);
        for i in 0..3 {
            state.push(WindowFrame {
                timestamp: i as f64,
                twist: Twist::zero(),
                hypothesis: None,
                pose: Pose::identity(),
            });
        }
        assert_eq!(state.len(), 2);
        assert_eq!(state.first().timestamp, 1.0);
    }

    #[test]
    #[should_panic(expected = "strictly increase")]
    fn window_push_panics_on_non_increasing_time() {
        let mut state = WindowState::new(3);
        let frame = WindowFrame {
            timestamp: 1.0,
            twist: Twist::zero(),
            hypothesis: None,
            pose: Pose::identity(),
        };
        state.push(frame.clone());
        state.push(frame);
    }

    #[test]
    fn window_energy_zero_on_perfect_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ts, tw, poses) = truth_chain(&mut rng, 5);
        let state = window_from(&ts, &tw, &poses, &exact_hyps(&poses));
        let energy = window_energy(&state, &poses[0], &TrackerConfig::default());
        assert!(energy < 1e-24, "energy = {energy:e}");
    }

    #[test]
    fn window_energy_single_frame_translation_unit() {
        let hyp = Pose::identity();
        let off = Pose::new(Rotation::identity(), Vector3::new(0.01, 0.0, 0.0));
        let state = window_from(
            &[0.0],
            &[Twist::zero()],
            &[off],
            &[Some(Hypothesis { pose: hyp, confidence: 1.0 })],
        );
        let energy = window_energy(&state, &off, &TrackerConfig::default());
        assert_abs_diff_eq!(energy, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn window_energy_single_frame_quarter_turn() {
        let hyp = Pose::identity();
        let off = Pose::new(rotation_exp(&Vector3::new(0.0, 0.0, FRAC_PI_2)), Vector3::zeros());
        let state = window_from(
            &[0.0],
            &[Twist::zero()],
            &[off],
            &[Some(Hypothesis { pose: hyp, confidence: 1.0 })],
        );
        let energy = window_energy(&state, &off, &TrackerConfig::default());
        // chordal_sq of a quarter turn is 4, divided by lambda_r^2 = 0.01.
        assert_abs_diff_eq!(energy, 400.0, epsilon = 1e-9);
    }

    #[test]
    fn window_energy_ignores_missing_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ts, tw, poses) = truth_chain(&mut rng, 4);
        let mut hyps = exact_hyps(&poses);
        hyps[1] = None;
        hyps[3] = Some(Hypothesis {
            pose: Pose::new(poses[3].rotation, poses[3].translation + Vector3::new(0.01, 0.0, 0.0)),
            confidence: 0.5,
        });
        let state = window_from(&ts, &tw, &poses, &hyps);
        let energy = window_energy(&state, &poses[0], &TrackerConfig::default());
        assert_abs_diff_eq!(energy, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn window_gradient_passes_gradient_check_at_seeded_states() {
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let n = rng.random_range(2..=5);
            let (ts, tw, poses) = truth_chain(&mut rng, n);
            let mut hyps: Vec<Option<Hypothesis>> = Vec::new();
            for pose in &poses {
                if rng.random_range(0.0..1.0) < 0.2 {
                    hyps.push(None);
                } else {
                    let jitter = rotation_exp(&(random_unit(&mut rng) * rng.random_range(0.0..0.1)));
                    hyps.push(Some(Hypothesis {
                        pose: Pose::new(
                            jitter.compose(&pose.rotation),
                            pose.translation + random_unit(&mut rng) * rng.random_range(0.0..0.01),
                        ),
                        confidence: rng.random_range(0.2..2.0),
                    }));
                }
            }
            let state = window_from(&ts, &tw, &poses, &hyps);
            let config = TrackerConfig::default();
            let problem = WindowProblem::new(&state, &config);
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let disc = gradient_check(&|y| problem.energy(y), &|y| problem.gradient(y), &y);
            worst = worst.max(disc);
        }
        assert!(worst < 1e-4, "worst discrepancy = {worst:e}");
    }

    #[test]
    fn window_optimize_recovers_perturbed_first_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (ts, tw, poses) = truth_chain(&mut rng, 5);
        // Perturb the anchor by 5 mm and 2 degrees, then store the chain
        // that wrongly hangs off it.
        let angle = 2.0_f64.to_radians();
        let bad_first = Pose::new(
            rotation_exp(&(random_unit(&mut rng) * angle)).compose(&poses[0].rotation),
            poses[0].translation + random_unit(&mut rng) * 0.005,
        );
        let mut state = window_from(&ts, &tw, &poses, &exact_hyps(&poses));
        let bad_chain = chain_from(&state, &bad_first);
        for (frame, pose) in state.frames.iter_mut().zip(&bad_chain) {
            frame.pose = *pose;
        }

        let config = TrackerConfig::default();
        let before = window_energy(&state, &bad_first, &config);
        let updated = window_optimize(&mut state, &config).unwrap();
        let after = window_energy(&state, &updated[0], &config);
        assert!(after <= before);

        let t_err = (updated[0].translation - poses[0].translation).norm();
        let r_err = geodesic_angle(&updated[0].rotation, &poses[0].rotation);
        assert!(t_err < 2e-4, "translation error {t_err:e}");
        assert!(r_err < 0.1_f64.to_radians(), "rotation error {r_err:e}");

        // Coarse grid over the same 6-DoF neighborhood confirms the energy
        // minimum the optimizer should have landed near: no grid cell beats
        // the true anchor.
        let truth_energy = window_energy(&state, &poses[0], &config);
        let steps = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let mut best_grid = f64::INFINITY;
        let mut best_is_center = false;
        for &ix in &steps {
            for &iy in &steps {
                for &iz in &steps {
                    for &rx in &steps {
                        for &ry in &steps {
                            for &rz in &steps {
                                let u = Vector3::new(ix, iy, iz) * 0.003;
                                let d = Vector3::new(rx, ry, rz) * 0.015;
                                let cand = Pose::new(
                                    rotation_exp(&d).compose(&poses[0].rotation),
                                    poses[0].translation + u,
                                );
                                let e = window_energy(&state, &cand, &config);
                                if e < best_grid {
                                    best_grid = e;
                                    best_is_center = u == Vector3::zeros() && d == Vector3::zeros();
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(best_is_center, "grid minimum {best_grid:e} vs truth {truth_energy:e}");
    }

    #[test]
    fn window_optimize_without_hypotheses_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (ts, tw, poses) = truth_chain(&mut rng, 5);
        let hyps = vec![None; 5];
        let mut state = window_from(&ts, &tw, &poses, &hyps);
        let problem_energy = window_energy(&state, &poses[0], &TrackerConfig::default());
        assert_eq!(problem_energy, 0.0);
        let updated = window_optimize(&mut state, &TrackerConfig::default()).unwrap();
        assert_eq!(updated, poses);
    }

    #[test]
    fn window_optimize_is_idempotent_on_exact_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (ts, tw, poses) = truth_chain(&mut rng, 5);
        let mut state = window_from(&ts, &tw, &poses, &exact_hyps(&poses));
        let once = window_optimize(&mut state, &TrackerConfig::default()).unwrap();
        let twice = window_optimize(&mut state, &TrackerConfig::default()).unwrap();
        assert_eq!(once, poses);
        assert_eq!(twice, poses);
    }

    #[test]
    fn window_optimize_reduces_energy_under_twist_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (ts, tw, poses) = truth_chain(&mut rng, 5);
        let bias = Vector3::new(0.05, 0.0, 0.0);
        let biased: Vec<Twist> = tw.iter().map(|t| Twist::new(t.linear, t.angular + bias)).collect();
        // Stored poses follow the biased chain, as online tracking would.
        let mut state = window_from(&ts, &biased, &poses, &exact_hyps(&poses));
        let stored = chain_from(&state, &poses[0]);
        for (frame, pose) in state.frames.iter_mut().zip(&stored) {
            frame.pose = *pose;
        }
        let config = TrackerConfig::default();
        let before = window_energy(&state, &poses[0], &config);
        window_optimize(&mut state, &config).unwrap();
        let after = window_energy(&state, &state.first().pose, &config);
        assert!(after <= before, "energy rose: {before:e} -> {after:e}");
        assert!(after < 0.6 * before, "optimizer barely moved: {before:e} -> {after:e}");
    }

    #[test]
    fn window_optimize_rechains_rigidly() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let (ts, tw, poses) = truth_chain(&mut rng, 4);
            let mut hyps = exact_hyps(&poses);
            // Jitter the hypotheses so the optimizer has real work.
            for h in hyps.iter_mut().flatten() {
                h.pose.translation += random_unit(&mut rng) * 0.004;
            }
            let mut state = window_from(&ts, &tw, &poses, &hyps);
            let updated = window_optimize(&mut state, &TrackerConfig::default()).unwrap();
            for i in 1..updated.len() {
                let rechained = integrate_pose(&updated[i - 1], &tw[i], ts[i] - ts[i - 1]);
                assert!((rechained.translation - updated[i].translation).norm() < 1e-12);
                assert!(
                    (rechained.rotation.matrix() - updated[i].rotation.matrix()).abs().max() < 1e-12
                );
            }
        }
    }

    /// Closed-form pose under a constant world-frame velocity field
    /// `v(p) = v0 + w x p`: the screw motion
    /// `R(s) = exp([w s]x) R0`, `t(s) = J_l(w s) v0 s + exp([w s]x) t0`.
    fn screw_pose(initial: &Pose, v0: &Vector3<f64>, w: &Vector3<f64>, s: f64) -> Pose {
        let r = rotation_exp(&(w * s));
        Pose::new(
            r.compose(&initial.rotation),
            so3_left_jacobian(&(w * s)) * (v0 * s) + r.rotate(&initial.translation),
        )
    }

    #[test]
    fn kinematics_only_tracks_constant_screw_motion() {
        let initial = Pose::new(
            rotation_exp(&Vector3::new(0.2, -0.1, 0.4)),
            Vector3::new(0.01, 0.0, 0.005),
        );
        let w = Vector3::new(0.01, 0.02, -0.02);
        let v0 = Vector3::new(0.0012, -0.001, 0.0009);
        let frames: Vec<(f64, ContactObservation)> = (0..100)
            .map(|k| {
                let s = k as f64 * FPS_DT;
                let pose = screw_pose(&initial, &v0, &w, s);
                // The field referenced at the world origin.
                (s, observe(&pose, &Twist::new(v0, w), &Vector3::zeros()))
            })
            .collect();
        let tracked = track_kinematics_only(&frames, &initial).unwrap();
        let truth = screw_pose(&initial, &v0, &w, 99.0 * FPS_DT);
        let last = tracked.last().unwrap();
        assert!(geodesic_angle(&last.rotation, &truth.rotation) < 1e-4);
        assert!((last.translation - truth.translation).norm() < 1e-5);
    }

    #[test]
    fn kinematics_only_zero_motion_stays_put() {
        let initial = Pose::new(rotation_exp(&Vector3::new(0.3, 0.1, -0.2)), Vector3::new(0.05, -0.02, 0.1));
        let frames: Vec<(f64, ContactObservation)> = (0..50)
            .map(|k| (k as f64 * FPS_DT, observe(&initial, &Twist::zero(), &Vector3::zeros())))
            .collect();
        let tracked = track_kinematics_only(&frames, &initial).unwrap();
        for pose in tracked {
            assert!((pose.translation - initial.translation).norm() < 1e-13);
            assert!((pose.rotation.matrix() - initial.rotation.matrix()).abs().max() < 1e-13);
        }
    }

    #[test]
    fn kinematics_only_drifts_under_velocity_noise() {
        let initial = Pose::identity();
        let sigma = 1e-3;
        let frames_per_run = 100;
        let mut mean_err = vec![0.0; frames_per_run];
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let noise = Normal::new(0.0, sigma).unwrap();
            let frames: Vec<(f64, ContactObservation)> = (0..frames_per_run)
                .map(|k| {
                    let clean = observe(&initial, &Twist::zero(), &Vector3::zeros());
                    let velocities = clean
                        .velocities
                        .iter()
                        .map(|v| {
                            v + Vector3::new(
                                noise.sample(&mut rng),
                                noise.sample(&mut rng),
                                noise.sample(&mut rng),
                            )
                        })
                        .collect();
                    (k as f64 * FPS_DT, ContactObservation::new(clean.points.clone(), velocities).unwrap())
                })
                .collect();
            let tracked = track_kinematics_only(&frames, &initial).unwrap();
            for (k, pose) in tracked.iter().enumerate() {
                mean_err[k] += pose.translation.norm() / 20.0;
            }
        }
        let idx: Vec<f64> = (0..frames_per_run).map(|k| k as f64).collect();
        let rho = crate::metrics::spearman_rank_correlation(&idx, &mean_err);
        assert!(rho > 0.5, "rank correlation {rho}");
    }

    #[test]
    fn fused_noiseless_reproduces_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (ts, tw, poses) = truth_chain(&mut rng, 40);
        let frames: Vec<(f64, ContactObservation)> = (0..poses.len())
            .map(|i| {
                // Frame i's contacts carry the twist of the interval
                // (i-1, i], whose linear part is referenced at the previous
                // frame's origin.
                let reference = if i == 0 { poses[0].translation } else { poses[i - 1].translation };
                let twist = if i == 0 { Twist::zero() } else { tw[i] };
                (ts[i], observe(&poses[i], &twist, &reference))
            })
            .collect();
        let hyps = exact_hyps(&poses);
        let config = TrackerConfig::default();
        let tracked = track_fused(&frames, &hyps, &poses[0], &config).unwrap();
        for (pose, truth) in tracked.iter().zip(&poses) {
            assert!((pose.translation - truth.translation).norm() < 1e-6);
            assert!(geodesic_angle(&pose.rotation, &truth.rotation) < 1e-6);
        }
    }

    #[test]
    fn fused_requires_a_hypothesis_in_the_first_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (ts, tw, poses) = truth_chain(&mut rng, 10);
        let frames: Vec<(f64, ContactObservation)> = (0..poses.len())
            .map(|i| {
                let reference = if i == 0 { poses[0].translation } else { poses[i - 1].translation };
                let twist = if i == 0 { Twist::zero() } else { tw[i] };
                (ts[i], observe(&poses[i], &twist, &reference))
            })
            .collect();
        let config = TrackerConfig::default();

        let none: Vec<Option<Hypothesis>> = vec![None; poses.len()];
        let err = track_fused(&frames, &none, &poses[0], &config).unwrap_err();
        assert!(matches!(err, TrackError::MissingInitialHypothesisWindow { window_n: 5 }));

        // One hypothesis at the last warm-up frame is enough.
        let mut sparse = none.clone();
        sparse[4] = Some(Hypothesis { pose: poses[4], confidence: 1.0 });
        let tracked = track_fused(&frames, &sparse, &poses[0], &config).unwrap();
        assert_eq!(tracked.len(), poses.len());
    }

    #[test]
    fn visual_only_replays_hypotheses_and_coasts_through_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let (ts, tw, poses) = truth_chain(&mut rng, 6);
        let frames: Vec<(f64, ContactObservation)> = (0..poses.len())
            .map(|i| {
                let reference = if i == 0 { poses[0].translation } else { poses[i - 1].translation };
                let twist = if i == 0 { Twist::zero() } else { tw[i] };
                (ts[i], observe(&poses[i], &twist, &reference))
            })
            .collect();
        let mut hyps = exact_hyps(&poses);
        hyps[2] = None;
        let config = TrackerConfig { mode: TrackMode::VisualOnly, ..TrackerConfig::default() };
        let tracked = track_fused(&frames, &hyps, &poses[0], &config).unwrap();
        assert_eq!(tracked[1], poses[1]);
        assert_eq!(tracked[2], poses[1], "gap should coast on the last hypothesis");
        assert_eq!(tracked[3], poses[3]);
    }

    #[test]
    fn kinematics_mode_delegates_to_the_baseline() {
        let initial = Pose::identity();
        let frames: Vec<(f64, ContactObservation)> = (0..10)
            .map(|k| (k as f64 * FPS_DT, observe(&initial, &Twist::zero(), &Vector3::zeros())))
            .collect();
        let config = TrackerConfig { mode: TrackMode::KinematicsOnly, ..TrackerConfig::default() };
        let no_hyps: Vec<Option<Hypothesis>> = Vec::new();
        let via_fused = track_fused(&frames, &no_hyps, &initial, &config).unwrap();
        let direct = track_kinematics_only(&frames, &initial).unwrap();
        assert_eq!(via_fused, direct);
    }
}
