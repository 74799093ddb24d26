//! Evaluation metrics for flow, segmentation, images and point tracks.

mod ari;
mod flow;
mod report;
mod tracking;

use thiserror::Error;

use crate::export::ExportError;

pub use ari::fg_ari;
pub use flow::{aepe, error_rate, OutlierThresholds};
pub use report::{evaluate, EvalTask};
pub use tracking::{naive_baseline, track_metrics, TrackMetrics, NUM_THRESHOLDS, THRESHOLD_BASE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("ground truth has no foreground pixels")]
    NoForeground,
    #[error("mismatched tracks: {0}")]
    MismatchedTracks(String),
    #[error(transparent)]
    Export(#[from] ExportError),
}

/// Peak signal-to-noise ratio in dB; `+∞` for identical inputs.
pub fn psnr(a: &[f64], b: &[f64], max_val: f64) -> Result<f64, MetricsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::ShapeMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}
