//! Twist estimation from contact-point observations.
//!
//! A rigid body moving with twist `(v, w)` about a center `t` imposes
//! `v_ci = v + w x (p_ci - t)` on every attached contact point. The energy
//!
//! `E(v, w, t) = sum_i || v_ci - v - w x (p_ci - t) ||^2`
//!
//! is minimized by alternating two exact block solves: a linear least-squares
//! solve for `(v, w)` with `t` fixed, and a closed-form update of `t` with
//! `(v, w)` fixed. Each half-step is an exact minimizer of its block, so the
//! energy never increases.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::geom::{skew, Twist};

/// Relative singular-value cutoff for rank decisions and the min-norm
/// pseudoinverse: values below `1e-10 * sigma_max` are treated as zero.
const SV_RELATIVE_TOL: f64 = 1e-10;

/// Angular speed below which the rotation center is unidentifiable (the
/// `w x (p - t)` term vanishes) and the center update is skipped.
const CENTER_OMEGA_MIN: f64 = 1e-6;

/// Twist change between alternation rounds that counts as converged.
const TWIST_CHANGE_TOL: f64 = 1e-9;

/// Maximum alternation rounds; with exact block solves the scheme settles in
/// a handful of rounds and a small cap keeps per-frame cost bounded.
const MAX_ROUNDS: usize = 10;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("contact observation has no points")]
    EmptyObservation,
    #[error("contact observation has {points} points but {velocities} velocities")]
    LengthMismatch { points: usize, velocities: usize },
}

/// Positions and velocities of the currently adhering contact points, world
/// frame. Lengths always match.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactObservation {
    pub points: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
}

impl ContactObservation {
    pub fn new(
        points: Vec<Vector3<f64>>,
        velocities: Vec<Vector3<f64>>,
    ) -> Result<Self, KinematicsError> {
        if points.len() != velocities.len() {
            return Err(KinematicsError::LengthMismatch {
                points: points.len(),
                velocities: velocities.len(),
            });
        }
        if points.is_empty() {
            return Err(KinematicsError::EmptyObservation);
        }
        Ok(ContactObservation { points, velocities })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Result of the alternating estimation.
#[derive(Debug, Clone)]
pub struct KinematicEstimate {
    /// Estimated twist; `linear` is the velocity of the material point at
    /// `center` (transport it before applying at another reference point).
    pub twist: Twist,
    /// Final rotation-center estimate.
    pub center: Vector3<f64>,
    /// `sqrt(energy / N_c)`, meters/second.
    pub residual_rms: f64,
    /// Numerical rank of the final twist system (6 = fully determined).
    pub rank: usize,
    /// Alternation rounds actually executed.
    pub iterations_used: usize,
    /// Energy after every half-step (twist solve, then center update), in
    /// execution order. Non-increasing by construction; kept for diagnostics
    /// and the monotonicity tests.
    pub energy_trace: Vec<f64>,
}

/// The energy `sum_i || v_ci - v - w x (p_ci - t) ||^2`, (m/s)^2.
pub fn kinematic_energy(obs: &ContactObservation, twist: &Twist, center: &Vector3<f64>) -> f64 {
    obs.points
        .iter()
        .zip(&obs.velocities)
        .map(|(p, v)| (v - twist.linear - twist.angular.cross(&(p - center))).norm_squared())
        .sum()
}

/// Least-squares solve of the stacked `3 N_c x 6` system with rows
/// `[I | -skew(p_ci - center)]` against the observed velocities, via SVD.
///
/// Returns the minimum-norm solution and the numerical rank (singular values
/// above `1e-10 * sigma_max`). Degenerate geometry (rank < 6) is reported,
/// not raised: the null-space component of the twist is simply zero.
pub fn solve_twist_fixed_center(
    obs: &ContactObservation,
    center: &Vector3<f64>,
) -> (Twist, usize) {
    let n = obs.len();
    let mut a = DMatrix::zeros(3 * n, 6);
    let mut b = DVector::zeros(3 * n);
    for (i, (p, v)) in obs.points.iter().zip(&obs.velocities).enumerate() {
        let s = skew(&(p - center));
        for r in 0..3 {
            a[(3 * i + r, r)] = 1.0;
            for c in 0..3 {
                a[(3 * i + r, 3 + c)] = -s[(r, c)];
            }
            b[3 * i + r] = v[r];
        }
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = SV_RELATIVE_TOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let mut x = svd.solve(&b, tol).expect("SVD computed with U and V");
    // Two rounds of iterative refinement. The raw SVD solve leaves a
    // normal-equation residual around 1e-12, enough to make the alternation
    // cycle instead of converge; refinement brings it to machine level while
    // staying inside the range space (min-norm is preserved).
    for _ in 0..2 {
        let r = &b - &a * &x;
        x += svd.solve(&r, tol).expect("SVD computed with U and V");
    }
    let twist = Twist::new(
        Vector3::new(x[0], x[1], x[2]),
        Vector3::new(x[3], x[4], x[5]),
    );
    (twist, rank)
}

/// Closed-form center update with the twist held fixed.
///
/// Writing `d_i = v_ci - v - w x p_ci`, the energy is
/// `sum_i || d_i + w x t ||^2`, minimized over the reachable set
/// `w x t (perpendicular to w)` by `t_perp = (w x d_mean) / |w|^2`. The
/// component of `t` along `w` does not enter the energy, so it is carried
/// over from `center` (minimum change, not minimum norm, along the null
/// direction). For `|w| <` 1e-6 rad/s the center is unidentifiable and
/// `center` is returned unchanged.
pub fn solve_center_fixed_twist(
    obs: &ContactObservation,
    twist: &Twist,
    center: &Vector3<f64>,
) -> Vector3<f64> {
    let w = twist.angular;
    let norm_w = w.norm();
    if norm_w < CENTER_OMEGA_MIN {
        return *center;
    }
    let n = obs.len() as f64;
    let d_mean = obs
        .points
        .iter()
        .zip(&obs.velocities)
        .map(|(p, v)| v - twist.linear - w.cross(p))
        .sum::<Vector3<f64>>()
        / n;
    let t_perp = w.cross(&d_mean) / norm_w.powi(2);
    let axis = w / norm_w;
    t_perp + axis * center.dot(&axis)
}

/// Alternating minimization of the contact energy, starting the center at
/// `initial_center` (in tracking, the current translation estimate).
///
/// Runs at most 10 rounds of (twist solve, center update), stopping early
/// once the twist changes by less than 1e-9 between rounds.
pub fn estimate_kinematics(
    obs: &ContactObservation,
    initial_center: &Vector3<f64>,
) -> Result<KinematicEstimate, KinematicsError> {
    if obs.points.is_empty() {
        return Err(KinematicsError::EmptyObservation);
    }
    if obs.points.len() != obs.velocities.len() {
        return Err(KinematicsError::LengthMismatch {
            points: obs.points.len(),
            velocities: obs.velocities.len(),
        });
    }

    let mut center = *initial_center;
    let mut twist = Twist::zero();
    let mut rank = 0;
    let mut iterations_used = 0;
    let mut energy_trace = Vec::with_capacity(2 * MAX_ROUNDS);
    let mut prev: Option<Twist> = None;

    for round in 1..=MAX_ROUNDS {
        let (t, r) = solve_twist_fixed_center(obs, &center);
        twist = t;
        rank = r;
        iterations_used = round;
        energy_trace.push(kinematic_energy(obs, &twist, &center));

        if let Some(p) = prev {
            let change = ((twist.linear - p.linear).norm_squared()
                + (twist.angular - p.angular).norm_squared())
            .sqrt();
            if change < TWIST_CHANGE_TOL {
                break;
            }
        }
        prev = Some(twist);

        center = solve_center_fixed_twist(obs, &twist, &center);
        energy_trace.push(kinematic_energy(obs, &twist, &center));
    }

    let energy = *energy_trace.last().expect("at least one round ran");
    let residual_rms = (energy / obs.len() as f64).sqrt();
    Ok(KinematicEstimate { twist, center, residual_rms, rank, iterations_used, energy_trace })
}
