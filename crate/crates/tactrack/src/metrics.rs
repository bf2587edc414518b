//! Pose-track accuracy metrics: per-frame rotation/translation errors, the
//! combined 5-degree-5-cm and 5-degree-5-mm success rates, their arithmetic
//! means, and a rank correlation used to quantify drift.
//!
//! Rotation error is the geodesic angle between estimate and ground truth,
//! with no allowance for object symmetry; symmetric shapes will read high.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{geodesic_angle, Pose};

const ANGLE_THRESHOLD_DEG: f64 = 5.0;
const LOOSE_TRANSLATION_MM: f64 = 50.0;
const TIGHT_TRANSLATION_MM: f64 = 5.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{estimates} estimated poses but {ground_truth} ground-truth poses")]
    LengthMismatch { estimates: usize, ground_truth: usize },
    #[error("metrics need at least one frame")]
    Empty,
}

/// Error of one frame against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub rotation_deg: f64,
    pub translation_mm: f64,
}

/// Track-level summary. Percentages count frames meeting BOTH the 5 degree
/// and the translation threshold (5 cm loose, 5 mm tight); means are
/// arithmetic over frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregates {
    pub pct_5deg5cm: f64,
    pub pct_5deg5mm: f64,
    pub mean_rot_deg: f64,
    pub mean_trans_mm: f64,
}

pub fn frame_errors(
    estimates: &[Pose],
    ground_truth: &[Pose],
) -> Result<Vec<FrameError>, MetricsError> {
    if estimates.len() != ground_truth.len() {
        return Err(MetricsError::LengthMismatch {
            estimates: estimates.len(),
            ground_truth: ground_truth.len(),
        });
    }
    Ok(estimates
        .iter()
        .zip(ground_truth)
        .map(|(est, gt)| FrameError {
            rotation_deg: geodesic_angle(&est.rotation, &gt.rotation).to_degrees(),
            translation_mm: (est.translation - gt.translation).norm() * 1e3,
        })
        .collect())
}

pub fn aggregate(errors: &[FrameError]) -> Result<MetricAggregates, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = errors.len() as f64;
    let hits = |translation_limit: f64| {
        errors
            .iter()
            .filter(|e| e.rotation_deg <= ANGLE_THRESHOLD_DEG && e.translation_mm <= translation_limit)
            .count() as f64
    };
    Ok(MetricAggregates {
        pct_5deg5cm: 100.0 * hits(LOOSE_TRANSLATION_MM) / n,
        pct_5deg5mm: 100.0 * hits(TIGHT_TRANSLATION_MM) / n,
        mean_rot_deg: errors.iter().map(|e| e.rotation_deg).sum::<f64>() / n,
        mean_trans_mm: errors.iter().map(|e| e.translation_mm).sum::<f64>() / n,
    })
}

pub fn compute_metrics(
    estimates: &[Pose],
    ground_truth: &[Pose],
) -> Result<MetricAggregates, MetricsError> {
    if estimates.is_empty() {
        return Err(MetricsError::Empty);
    }
    aggregate(&frame_errors(estimates, ground_truth)?)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Tied values share the average of the ranks they span.
        let shared = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with tie-averaged ranks. Used to test for
/// drift: error that accumulates over time correlates positively with the
/// frame index. Returns 0 when either input is constant.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "rank correlation needs paired samples");
    assert!(xs.len() >= 2, "rank correlation needs at least two samples");
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
