//! A small Adam-style minimizer for low-dimensional smooth objectives, plus
//! a finite-difference fallback and a gradient checker.
//!
//! [`minimize`] is one Adam run with a plateau-based early stop and
//! best-seen-iterate return. A single fixed learning rate settles into an
//! oscillation whose amplitude scales with the rate, which caps the
//! achievable accuracy; [`minimize_scheduled`] chains several `minimize`
//! calls with a decaying rate to push through that floor while staying
//! inside a fixed total iteration budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Central-difference step for finite-difference gradients and the checker.
const FD_STEP: f64 = 1e-6;

/// Borrowed gradient callback: point in, gradient vector out.
pub type Gradient<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("objective returned a non-finite value during minimization")]
    NonFiniteObjective,
}

/// Adam hyperparameters and stopping rules.
///
/// Stopping: after each iteration, if the best value seen so far failed to
/// improve by at least `relative_tolerance * max(1, |best|)` over the
/// trailing `tolerance_window` iterations, the run stops early.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub tolerance_window: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iterations: 200,
            relative_tolerance: 1e-8,
            tolerance_window: 10,
        }
    }
}

/// Outcome of a minimization: the best iterate seen, its value, and how many
/// Adam steps actually ran.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn check_finite(v: f64) -> Result<f64, OptimError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OptimError::NonFiniteObjective)
    }
}

fn central_difference(
    objective: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<Vec<f64>, OptimError> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let fp = check_finite(objective(&probe))?;
        probe[i] = x[i] - FD_STEP;
        let fm = check_finite(objective(&probe))?;
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * FD_STEP);
    }
    Ok(g)
}

/// One Adam run from `x0`.
///
/// When `gradient` is `None`, central finite differences (step 1e-6) supply
/// the descent direction. Returns the best-seen iterate, which is not
/// necessarily the last one: near a minimum the fixed learning rate
/// oscillates across it. Deterministic: identical inputs produce bitwise
/// identical iterates.
pub fn minimize(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: Option<&Gradient>,
    x0: &[f64],
    config: &OptimizerConfig,
) -> Result<Minimum, OptimError> {
    let n = x0.len();
    let f0 = check_finite(objective(x0))?;

    let mut x = x0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut best_x = x.clone();
    let mut best_f = f0;
    // Best-so-far after each completed iteration; index 0 is the start.
    let mut best_history = Vec::with_capacity(config.max_iterations + 1);
    best_history.push(f0);
    let mut iterations = 0;

    for k in 1..=config.max_iterations {
        let g = match gradient {
            Some(grad) => grad(&x),
            None => central_difference(objective, &x)?,
        };
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - config.beta1.powi(k as i32));
            let v_hat = v[i] / (1.0 - config.beta2.powi(k as i32));
            x[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        let fx = check_finite(objective(&x))?;
        iterations = k;
        if fx < best_f {
            best_f = fx;
            best_x.copy_from_slice(&x);
        }
        best_history.push(best_f);

        if k >= config.tolerance_window {
            let prior = best_history[k - config.tolerance_window];
            let improvement = prior - best_f;
            if improvement < config.relative_tolerance * prior.abs().max(1.0) {
                break;
            }
        }
    }

    Ok(Minimum { x: best_x, value: best_f, iterations })
}

/// One stage of a learning-rate schedule.
#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub learning_rate: f64,
    pub iterations: usize,
}

/// A five-stage decaying schedule (rate factors 1, 0.3, 0.1, 0.03, 0.01)
/// whose stage iteration counts sum to at most `budget`.
pub fn decay_schedule(base_learning_rate: f64, budget: usize) -> Vec<Stage> {
    let fractions = [0.4, 0.2, 0.15, 0.15, 0.1];
    let factors = [1.0, 0.3, 0.1, 0.03, 0.01];
    let mut stages = Vec::with_capacity(5);
    let mut used = 0;
    for (fraction, factor) in fractions.iter().zip(factors) {
        let iters = ((budget as f64 * fraction).floor() as usize).max(1).min(budget - used);
        if iters == 0 {
            break;
        }
        stages.push(Stage { learning_rate: base_learning_rate * factor, iterations: iters });
        used += iters;
        if used >= budget {
            break;
        }
    }
    stages
}

/// Chained [`minimize`] runs with per-stage learning rates, each stage
/// starting from the previous stage's best iterate.
///
/// Best-seen semantics compose: the returned value never exceeds any stage's
/// starting value, so the overall result is still bounded by
/// `objective(x0)`. `iterations` is the total across stages.
pub fn minimize_scheduled(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: Option<&Gradient>,
    x0: &[f64],
    stages: &[Stage],
    config: &OptimizerConfig,
) -> Result<Minimum, OptimError> {
    let mut best = Minimum { x: x0.to_vec(), value: check_finite(objective(x0))?, iterations: 0 };
    let mut total = 0;
    for stage in stages {
        let cfg = OptimizerConfig {
            learning_rate: stage.learning_rate,
            max_iterations: stage.iterations,
            ..config.clone()
        };
        let result = minimize(objective, gradient, &best.x, &cfg)?;
        total += result.iterations;
        if result.value <= best.value {
            best = result;
        }
    }
    best.iterations = total;
    Ok(best)
}

/// Max over coordinates of `|analytic - central difference| / max(1, |central
/// difference|)` at `x`, with step 1e-6. Non-finite objective values surface
/// as a NaN discrepancy rather than an error.
pub fn gradient_check(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &Gradient,
    x: &[f64],
) -> f64 {
    let analytic = gradient(x);
    let mut worst: f64 = 0.0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let fp = objective(&probe);
        probe[i] = x[i] - FD_STEP;
        let fm = objective(&probe);
        probe[i] = x[i];
        let fd = (fp - fm) / (2.0 * FD_STEP);
        let disc = (analytic[i] - fd).abs() / fd.abs().max(1.0);
        worst = if disc > worst || disc.is_nan() { disc } else { worst };
    }
    worst
}
