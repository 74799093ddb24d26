//! Argument parsing for `kubgen generate`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use super::JobSpec;
use crate::scene::Resolution;

/// `WxH`, both positive.
pub fn parse_resolution(s: &str) -> Result<Resolution, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("resolution {s:?} has a zero side"));
    }
    Ok(Resolution::new(w, h))
}

/// Inclusive range `A..B`.
pub fn parse_frames(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: i32 = a.trim().parse().map_err(|_| format!("bad frame start in {s:?}"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("bad frame end in {s:?}"))?;
    if b < a {
        return Err(format!("frame range {s:?} is empty"));
    }
    Ok((a, b))
}

pub fn parse_config_pair(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct GenerateArgs {
    /// Scene worker: movi-basic, sod-multiview or texture-plane.
    #[arg(long)]
    pub worker: String,
    #[arg(long, default_value_t = 1)]
    pub num_scenes: u64,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub job_id: u32,
    #[arg(long, default_value_t = 1)]
    pub num_jobs: u32,
    #[arg(long, env = "KUBGEN_OUT")]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_resolution, default_value = "128x128")]
    pub resolution: Resolution,
    /// Inclusive frame range `A..B`; for multi-view workers, one view per frame.
    #[arg(long, value_parser = parse_frames)]
    pub frames: Option<(i32, i32)>,
    /// Scenes generated concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs_parallel: usize,
    /// Worker option `key=value`; repeatable.
    #[arg(long = "config", value_parser = parse_config_pair)]
    pub config: Vec<(String, String)>,
}

impl GenerateArgs {
    pub fn into_spec(self) -> JobSpec {
        JobSpec {
            worker: self.worker,
            num_scenes: self.num_scenes,
            master_seed: self.seed,
            job_id: self.job_id,
            num_jobs: self.num_jobs,
            output: self.out,
            resolution: self.resolution,
            frames: self.frames,
            jobs_parallel: self.jobs_parallel,
            config: self.config.into_iter().collect::<BTreeMap<_, _>>(),
        }
    }
}
