//! File-level evaluation behind `kubgen eval`.
//!
//! Flow, segmentation and psnr accept either two scene-record directories
//! (all frames are pooled) or two single `.kbr` rasters. Tracks accept
//! `tracks.json` files or record directories containing one.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::{aepe, error_rate, fg_ari, psnr, track_metrics, MetricsError, OutlierThresholds, THRESHOLD_BASE};
use crate::export::{read_layer, read_metadata, read_raster, read_tracks_file, Raster, TRACKS_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalTask {
    Flow,
    Segmentation,
    Tracks,
    Psnr,
}

impl EvalTask {
    pub fn name(self) -> &'static str {
        match self {
            EvalTask::Flow => "flow",
            EvalTask::Segmentation => "segmentation",
            EvalTask::Tracks => "tracks",
            EvalTask::Psnr => "psnr",
        }
    }
}

/// Loads `layer` for every frame of a record, or the single raster when
/// `path` is a file.
fn load(path: &Path, layer: &str) -> Result<Vec<Raster>, MetricsError> {
    if path.is_file() {
        return Ok(vec![read_raster(path)?]);
    }
    let md = read_metadata(path)?;
    Ok((0..md.num_frames).map(|i| read_layer(path, layer, i)).collect::<Result<_, _>>()?)
}

fn paired(pred: &Path, gt: &Path, layer: &str) -> Result<(Vec<Raster>, Vec<Raster>), MetricsError> {
    let (p, g) = (load(pred, layer)?, load(gt, layer)?);
    if p.len() != g.len() {
        return Err(MetricsError::ShapeMismatch(format!("{} predicted frames, {} ground-truth frames", p.len(), g.len())));
    }
    for (a, b) in p.iter().zip(&g) {
        if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) || a.dtype() != b.dtype() {
            return Err(MetricsError::ShapeMismatch(format!("{layer} rasters differ in shape or type")));
        }
    }
    Ok((p, g))
}

fn f32_data(r: &Raster) -> Result<&[f32], MetricsError> {
    r.as_f32().ok_or_else(|| MetricsError::ShapeMismatch("expected an f32 raster".into()))
}

fn u32_data(r: &Raster) -> Result<&[u32], MetricsError> {
    r.as_u32().ok_or_else(|| MetricsError::ShapeMismatch("expected a u32 raster".into()))
}

/// JSON number, or the strings `"inf"`/`"-inf"`/`"nan"`.
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn flow_report(pred: &Path, gt: &Path) -> Result<Map<String, Value>, MetricsError> {
    let (p, g) = paired(pred, gt, "forward_flow")?;
    let masks: Vec<Vec<bool>> = if gt.is_file() {
        g.iter().map(|r| Ok(f32_data(r)?.chunks(2).map(|c| c.iter().all(|v| v.is_finite())).collect())).collect::<Result<_, MetricsError>>()?
    } else {
        load(gt, "depth")?.iter().map(|d| Ok(f32_data(d)?.iter().map(|v| v.is_finite()).collect())).collect::<Result<_, MetricsError>>()?
    };
    let (mut pf, mut gf, mut mask) = (Vec::new(), Vec::new(), Vec::new());
    for ((a, b), m) in p.iter().zip(&g).zip(&masks) {
        if a.channels != 2 || m.len() * 2 != f32_data(b)?.len() {
            return Err(MetricsError::ShapeMismatch("flow rasters need two channels".into()));
        }
        pf.extend_from_slice(f32_data(a)?);
        gf.extend_from_slice(f32_data(b)?);
        mask.extend_from_slice(m);
    }
    let mut out = Map::new();
    out.insert("aepe".into(), number(aepe(&pf, &gf, &mask)?));
    out.insert("error_rate".into(), number(error_rate(&pf, &gf, &mask, OutlierThresholds::default())?));
    out.insert("num_frames".into(), json!(p.len()));
    out.insert("num_pixels".into(), json!(mask.iter().filter(|m| **m).count()));
    Ok(out)
}

fn segmentation_report(pred: &Path, gt: &Path) -> Result<Map<String, Value>, MetricsError> {
    let (p, g) = paired(pred, gt, "segmentation")?;
    let mut scores = Vec::new();
    for (a, b) in p.iter().zip(&g) {
        match fg_ari(u32_data(b)?, u32_data(a)?, 0) {
            Ok(v) => scores.push(v),
            Err(MetricsError::NoForeground) => {}
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(MetricsError::NoForeground);
    }
    let mut out = Map::new();
    out.insert("fg_ari".into(), number(scores.iter().sum::<f64>() / scores.len() as f64));
    out.insert("num_frames".into(), json!(scores.len()));
    Ok(out)
}

fn psnr_report(pred: &Path, gt: &Path) -> Result<Map<String, Value>, MetricsError> {
    let (p, g) = paired(pred, gt, "rgba")?;
    let rgb = |r: &Raster| -> Result<Vec<f64>, MetricsError> {
        let c = r.channels as usize;
        let keep = c.min(3);
        Ok(f32_data(r)?.chunks(c).flat_map(|px| px[..keep].iter().map(|v| *v as f64)).collect())
    };
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (x, y) in p.iter().zip(&g) {
        a.extend(rgb(x)?);
        b.extend(rgb(y)?);
    }
    let mut out = Map::new();
    out.insert("max_val".into(), json!(1.0));
    out.insert("num_frames".into(), json!(p.len()));
    out.insert("psnr".into(), number(psnr(&a, &b, 1.0)?));
    Ok(out)
}

fn tracks_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(TRACKS_FILE)
    } else {
        path.to_path_buf()
    }
}

fn tracks_report(pred: &Path, gt: &Path) -> Result<Map<String, Value>, MetricsError> {
    let p = read_tracks_file(&tracks_path(pred))?;
    let g = read_tracks_file(&tracks_path(gt))?;
    let m = track_metrics(&g.tracks, &p.tracks, THRESHOLD_BASE)?;
    let Value::Object(mut out) = serde_json::to_value(&m).map_err(|e| MetricsError::ShapeMismatch(e.to_string()))? else {
        unreachable!("metrics serialize to an object")
    };
    out.insert("num_tracks".into(), json!(g.tracks.len()));
    Ok(out)
}

/// Report with sorted keys.
pub fn evaluate(task: EvalTask, pred: &Path, gt: &Path) -> Result<Value, MetricsError> {
    let mut out = match task {
        EvalTask::Flow => flow_report(pred, gt)?,
        EvalTask::Segmentation => segmentation_report(pred, gt)?,
        EvalTask::Tracks => tracks_report(pred, gt)?,
        EvalTask::Psnr => psnr_report(pred, gt)?,
    };
    out.insert("task".into(), json!(task.name()));
    Ok(Value::Object(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::{write_raster, PointTrack, TracksDocument};

    #[test]
    fn raster_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = (dir.path().join("p.kbr"), dir.path().join("g.kbr"));
        write_raster(&g, &Raster::f32(2, 1, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        write_raster(&p, &Raster::f32(2, 1, 2, vec![4.0, 4.0, 0.0, 0.0]).unwrap()).unwrap();
        let r = evaluate(EvalTask::Flow, &p, &g).unwrap();
        assert_eq!(r["aepe"], json!(2.5));
        assert_eq!(r["task"], json!("flow"));
        let r = evaluate(EvalTask::Psnr, &g, &g).unwrap();
        assert_eq!(r["psnr"], json!("inf"));

        write_raster(&g, &Raster::u32(4, 1, 1, vec![1, 1, 2, 2]).unwrap()).unwrap();
        write_raster(&p, &Raster::u32(4, 1, 1, vec![1, 1, 1, 2]).unwrap()).unwrap();
        assert_eq!(evaluate(EvalTask::Segmentation, &p, &g).unwrap()["fg_ari"], json!(0.0));
        let report = evaluate(EvalTask::Segmentation, &p, &g).unwrap();
        let keys: Vec<&String> = report.as_object().unwrap().keys().collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tracks_input() {
        let dir = tempfile::tempdir().unwrap();
        let t = PointTrack {
            query: [1.0, 1.0, 0.0],
            positions: vec![[1.0, 1.0], [2.0, 2.0]],
            visible: vec![true, true],
            instance: "a".into(),
            local_point: [0.0; 3],
        };
        let doc = TracksDocument { num_frames: 2, tracks: vec![t] };
        let path = dir.path().join("tracks.json");
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        let r = evaluate(EvalTask::Tracks, dir.path(), &path).unwrap();
        assert_eq!(r["average_jaccard"], json!(1.0));
        assert_eq!(r["num_tracks"], json!(1));
    }
}
