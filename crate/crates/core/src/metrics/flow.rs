//! Optical-flow endpoint errors. Flows are `(dx, dy)` interleaved.

use super::MetricsError;

fn check(pred: &[f32], gt: &[f32], mask: &[bool]) -> Result<(), MetricsError> {
    if pred.len() != gt.len() || gt.len() != 2 * mask.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "pred {} values, gt {} values, mask {} pixels",
            pred.len(),
            gt.len(),
            mask.len()
        )));
    }
    if !mask.iter().any(|m| *m) {
        return Err(MetricsError::EmptyMask);
    }
    Ok(())
}

fn endpoint_errors<'a>(pred: &'a [f32], gt: &'a [f32], mask: &'a [bool]) -> impl Iterator<Item = (f64, f64)> + 'a {
    mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| {
        let (gx, gy) = (gt[2 * i] as f64, gt[2 * i + 1] as f64);
        let (dx, dy) = (pred[2 * i] as f64 - gx, pred[2 * i + 1] as f64 - gy);
        (dx.hypot(dy), gx.hypot(gy))
    })
}

/// Mean endpoint error over masked pixels, in pixels.
pub fn aepe(pred: &[f32], gt: &[f32], mask: &[bool]) -> Result<f64, MetricsError> {
    check(pred, gt, mask)?;
    let (sum, n) = endpoint_errors(pred, gt, mask).fold((0.0, 0usize), |(s, n), (e, _)| (s + e, n + 1));
    Ok(sum / n as f64)
}

/// Outlier thresholds: a pixel is wrong when its endpoint error exceeds
/// both `pixels` and `relative` times the ground-truth magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutlierThresholds {
    pub pixels: f64,
    pub relative: f64,
}

impl Default for OutlierThresholds {
    fn default() -> Self {
        OutlierThresholds { pixels: 3.0, relative: 0.05 }
    }
}

/// Fraction of masked pixels that are outliers.
pub fn error_rate(pred: &[f32], gt: &[f32], mask: &[bool], th: OutlierThresholds) -> Result<f64, MetricsError> {
    check(pred, gt, mask)?;
    let (bad, n) = endpoint_errors(pred, gt, mask)
        .fold((0usize, 0usize), |(b, n), (e, g)| (b + (e > th.pixels && e > th.relative * g) as usize, n + 1));
    Ok(bad as f64 / n as f64)
}
