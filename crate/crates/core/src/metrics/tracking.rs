//! Point-tracking metrics: occlusion accuracy, position accuracy at
//! thresholds `δ^x` and Jaccard.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::export::PointTrack;

pub const THRESHOLD_BASE: f64 = 2.0;
pub const NUM_THRESHOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackMetrics {
    pub occlusion_accuracy: f64,
    /// `<δˣ` for `x = 0..5`.
    pub position_accuracy: [f64; NUM_THRESHOLDS],
    pub average_position_accuracy: f64,
    pub jaccard: [f64; NUM_THRESHOLDS],
    pub average_jaccard: f64,
    pub delta: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `pred` against `gt` track by track. The query frame of each GT
/// track is not scored. Position accuracy counts every GT-visible frame
/// whatever the predicted visibility.
pub fn track_metrics(gt: &[PointTrack], pred: &[PointTrack], delta: f64) -> Result<TrackMetrics, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::MismatchedTracks(format!("{} gt tracks, {} predicted", gt.len(), pred.len())));
    }
    for (i, (g, p)) in gt.iter().zip(pred).enumerate() {
        let n = g.positions.len();
        if g.visible.len() != n || p.positions.len() != n || p.visible.len() != n {
            return Err(MetricsError::MismatchedTracks(format!("track {i} has mismatched frame counts")));
        }
    }
    let mut occ_ok = 0u64;
    let mut scored = 0u64;
    let mut gt_visible = 0u64;
    let mut within = [0u64; NUM_THRESHOLDS];
    let mut tp = [0u64; NUM_THRESHOLDS];
    let mut fn_ = [0u64; NUM_THRESHOLDS];
    let mut fp = [0u64; NUM_THRESHOLDS];
    for (g, p) in gt.iter().zip(pred) {
        let q = g.query_frame();
        for t in (0..g.positions.len()).filter(|t| *t != q) {
            let (gv, pv) = (g.visible[t], p.visible[t]);
            scored += 1;
            occ_ok += (gv == pv) as u64;
            gt_visible += gv as u64;
            let (a, b) = (g.positions[t], p.positions[t]);
            let dist = (a[0] - b[0]).hypot(a[1] - b[1]);
            for x in 0..NUM_THRESHOLDS {
                let close = dist < delta.powi(x as i32);
                within[x] += (gv && close) as u64;
                tp[x] += (gv && pv && close) as u64;
                fn_[x] += (gv && !(pv && close)) as u64;
                fp[x] += (pv && !(gv && close)) as u64;
            }
        }
    }
    let position_accuracy = within.map(|w| ratio(w, gt_visible));
    let jaccard: [f64; NUM_THRESHOLDS] = std::array::from_fn(|x| ratio(tp[x], tp[x] + fn_[x] + fp[x]));
    Ok(TrackMetrics {
        occlusion_accuracy: ratio(occ_ok, scored),
        average_position_accuracy: position_accuracy.iter().sum::<f64>() / NUM_THRESHOLDS as f64,
        average_jaccard: jaccard.iter().sum::<f64>() / NUM_THRESHOLDS as f64,
        position_accuracy,
        jaccard,
        delta,
    })
}

/// Predicts every query as motionless and always visible.
pub fn naive_baseline(queries: &[[f64; 3]], num_frames: usize) -> Vec<PointTrack> {
    queries
        .iter()
        .map(|q| PointTrack {
            query: *q,
            positions: vec![[q[0], q[1]]; num_frames],
            visible: vec![true; num_frames],
            instance: String::new(),
            local_point: [0.0; 3],
        })
        .collect()
}
