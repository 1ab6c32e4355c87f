//! Loss weighting for multi-configuration distillation.
//!
//! Each configuration's task loss is scaled by the inverse share of its
//! reconstruction loss, so every configuration starts from the same weighted
//! loss value.

use crate::error::{Error, Result};

/// Per-configuration losses collected at the end of reconstruction training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    pub mse: Vec<f64>,
    pub task: Option<Vec<f64>>,
}

/// `w_i = sum_j mse_j / mse_i`.
pub fn distill_weights(report: &LossReport) -> Result<Vec<f64>> {
    if report.mse.is_empty() {
        return Err(Error::InvalidArgument("loss report has no configurations".into()));
    }
    if let Some(bad) = report.mse.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidArgument(format!("reconstruction losses must be positive, got {bad}")));
    }
    let total: f64 = report.mse.iter().sum();
    Ok(report.mse.iter().map(|l| total / l).collect())
}

/// `sum_i w_i * task_i`.
pub fn kd_loss(weights: &[f64], task_losses: &[f64]) -> Result<f64> {
    if weights.len() != task_losses.len() {
        return Err(Error::mismatch(weights.len(), task_losses.len()));
    }
    Ok(weights.iter().zip(task_losses).map(|(w, t)| w * t).sum())
}

/// Mean of squared element differences.
pub fn mse<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::mismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("mse of empty buffers".into()));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.into() - y.into();
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}
