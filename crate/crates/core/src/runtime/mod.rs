//! Job execution: scene-index sharding, per-scene generation and the
//! dataset manifest.

mod cli;
mod texture;
mod workers;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::export::{extract_point_tracks, to_canonical_json, write_scene_record, ExportError, Raster, SceneRecord, TrackConfig};
use crate::physics::PhysicsError;
use crate::render::{render_frames, RenderError};
use crate::rng::{derive_scene_seed, Rng};
use crate::scene::{Resolution, SceneError};

pub use cli::{parse_config_pair, parse_frames, parse_resolution, GenerateArgs};
pub use texture::{band_limited_noise, bin_frequency, fft2, radial_frequency};
pub use workers::{
    default_cutoffs, run_worker, worker_movi_basic, worker_sod_multiview, worker_texture_plane, CommonConfig,
    MoviConfig, SceneParams, SodConfig, TextureConfig, ViewConfig, WorkerConfig, WorkerKind, WorkerOutput, WORKERS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("unknown worker {0:?}")]
    UnknownWorker(String),
    #[error("invalid job spec: {0}")]
    InvalidJobSpec(String),
    #[error("cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobSpec {
    pub worker: String,
    pub num_scenes: u64,
    pub master_seed: u64,
    pub job_id: u32,
    pub num_jobs: u32,
    pub output: PathBuf,
    pub resolution: Resolution,
    /// Inclusive; `None` uses the worker default.
    pub frames: Option<(i32, i32)>,
    /// Scenes generated concurrently.
    pub jobs_parallel: usize,
    pub config: BTreeMap<String, String>,
}

impl JobSpec {
    pub fn new(worker: &str, output: impl Into<PathBuf>) -> JobSpec {
        JobSpec {
            worker: worker.to_string(),
            num_scenes: 1,
            master_seed: 0,
            job_id: 0,
            num_jobs: 1,
            output: output.into(),
            resolution: Resolution::new(128, 128),
            frames: None,
            jobs_parallel: 1,
            config: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<WorkerConfig, RuntimeError> {
        let bad = |m: String| Err(RuntimeError::InvalidJobSpec(m));
        if self.num_jobs == 0 {
            return bad("num_jobs must be at least 1".into());
        }
        if self.job_id >= self.num_jobs {
            return bad(format!("job_id {} is not below num_jobs {}", self.job_id, self.num_jobs));
        }
        if self.resolution.width == 0 || self.resolution.height == 0 {
            return bad("resolution must be at least 1x1".into());
        }
        if let Some((a, b)) = self.frames {
            if b < a {
                return bad(format!("frame range {a}..{b} is empty"));
            }
        }
        if self.jobs_parallel == 0 {
            return bad("jobs_parallel must be at least 1".into());
        }
        WorkerConfig::parse(&self.worker, &self.config)
    }

    /// Scene indices owned by this job: `i mod num_jobs == job_id`.
    pub fn owned_scenes(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.num_scenes).filter(|i| i % self.num_jobs as u64 == self.job_id as u64)
    }

    pub fn manifest_name(&self) -> String {
        if self.num_jobs == 1 {
            "dataset_manifest.json".to_string()
        } else {
            format!("dataset_manifest.job-{:04}-of-{:04}.json", self.job_id, self.num_jobs)
        }
    }

    /// Hash of everything that determines scene contents; the shard
    /// assignment, output location and parallelism are left out.
    pub fn config_hash(&self) -> String {
        let doc = json!({
            "worker": self.worker,
            "num_scenes": self.num_scenes,
            "master_seed": self.master_seed,
            "resolution": [self.resolution.width, self.resolution.height],
            "frames": self.frames.map(|(a, b)| vec![a, b]),
            "config": self.config,
        });
        let text = serde_json::to_string(&doc).expect("plain json");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Command-line arguments after `kubgen generate` reproducing this spec.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![
            "--worker".to_string(),
            self.worker.clone(),
            "--num-scenes".into(),
            self.num_scenes.to_string(),
            "--seed".into(),
            self.master_seed.to_string(),
            "--job-id".into(),
            self.job_id.to_string(),
            "--num-jobs".into(),
            self.num_jobs.to_string(),
            "--out".into(),
            self.output.display().to_string(),
            "--resolution".into(),
            format!("{}x{}", self.resolution.width, self.resolution.height),
        ];
        if let Some((a, b)) = self.frames {
            args.extend(["--frames".into(), format!("{a}..{b}")]);
        }
        args.extend(["--jobs-parallel".into(), self.jobs_parallel.to_string()]);
        for (k, v) in &self.config {
            args.extend(["--config".into(), format!("{k}={v}")]);
        }
        args
    }
}

pub fn scene_dir_name(index: u64) -> String {
    format!("scene_{index:08}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub seed: u64,
    pub directory: String,
    /// Set when the scene failed; no directory is left behind then.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub worker: String,
    pub master_seed: u64,
    pub num_scenes: u64,
    pub job_id: u32,
    pub num_jobs: u32,
    pub resolution: [u32; 2],
    pub frames: Option<[i32; 2]>,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub scenes: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn failed(&self) -> usize {
        self.scenes.iter().filter(|s| s.error.is_some()).count()
    }
}

/// Builds, renders and packages one scene.
pub fn generate_scene_record(config: &WorkerConfig, seed: u64, index: u64, params: &SceneParams) -> Result<SceneRecord, RuntimeError> {
    let out = run_worker(config, seed, params)?;
    let scene = &out.scene;
    let bundles = render_frames(scene)?;
    let tracks = if config.common.tracks {
        let cfg = TrackConfig { num_queries: config.common.num_queries, ..Default::default() };
        match extract_point_tracks(scene, &bundles, &cfg, &mut Rng::new(derive_scene_seed(seed, 1))) {
            Ok(t) => Some(t),
            Err(ExportError::NoQueryCandidates) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let mut extra = BTreeMap::new();
    if let Some((name, per_id)) = &out.segment_layer {
        let res = scene.resolution;
        let rasters = bundles
            .iter()
            .map(|b| {
                let data = b.segmentation.iter().map(|s| per_id.get(s).copied().unwrap_or(0.0)).collect();
                Raster::f32(res.width, res.height, 1, data)
            })
            .collect::<Result<Vec<_>, _>>()?;
        extra.insert(name.clone(), rasters);
    }
    let mut record = SceneRecord::from_scene(scene, &bundles, &out.events, tracks, extra)?;
    let attrs = &mut record.metadata.attributes;
    attrs.extend(out.attributes);
    attrs.insert("scene_index".into(), json!(index));
    attrs.insert("seed".into(), json!(seed));
    let worker = match config.kind {
        WorkerKind::MoviBasic(_) => WORKERS[0],
        WorkerKind::SodMultiview(_) => WORKERS[1],
        WorkerKind::TexturePlane(_) => WORKERS[2],
    };
    attrs.insert("worker".into(), Value::String(worker.into()));
    Ok(record)
}

fn io_err(path: &Path, e: std::io::Error) -> RuntimeError {
    RuntimeError::Io(format!("{}: {e}", path.display()))
}

fn write_scene(dir: &Path, config: &WorkerConfig, seed: u64, index: u64, params: &SceneParams) -> Result<(), RuntimeError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let result = generate_scene_record(config, seed, index, params).and_then(|r| Ok(write_scene_record(dir, &r)?));
    if result.is_err() && dir.exists() {
        let _ = std::fs::remove_dir_all(dir);
    }
    result
}

/// Generates every scene owned by the job and writes the manifest. Scene
/// failures are recorded in the manifest; only invocation problems are
/// returned as errors.
pub fn run_job(spec: &JobSpec) -> Result<DatasetManifest, RuntimeError> {
    let config = spec.validate()?;
    std::fs::create_dir_all(&spec.output).map_err(|e| io_err(&spec.output, e))?;
    let params = SceneParams { resolution: spec.resolution, frames: spec.frames };
    let owned: Vec<u64> = spec.owned_scenes().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs_parallel)
        .build()
        .map_err(|e| RuntimeError::Io(e.to_string()))?;
    let scenes: Vec<ManifestEntry> = pool.install(|| {
        owned
            .par_iter()
            .map(|&index| {
                let seed = derive_scene_seed(spec.master_seed, index);
                let directory = scene_dir_name(index);
                let error = write_scene(&spec.output.join(&directory), &config, seed, index, &params).err().map(|e| e.to_string());
                ManifestEntry { index, seed, directory, error }
            })
            .collect()
    });
    let manifest = DatasetManifest {
        worker: spec.worker.clone(),
        master_seed: spec.master_seed,
        num_scenes: spec.num_scenes,
        job_id: spec.job_id,
        num_jobs: spec.num_jobs,
        resolution: [spec.resolution.width, spec.resolution.height],
        frames: spec.frames.map(|(a, b)| [a, b]),
        config: spec.config.clone(),
        config_hash: spec.config_hash(),
        scenes,
    };
    let path = spec.output.join(spec.manifest_name());
    std::fs::write(&path, to_canonical_json(&manifest)?).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
            for e in std::fs::read_dir(dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    walk(base, &p, out);
                } else {
                    out.insert(p.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&p).unwrap());
                }
            }
        }
        walk(dir, dir, &mut out);
        out
    }

    fn small(worker: &str, out: &Path) -> JobSpec {
        let mut s = JobSpec::new(worker, out);
        s.resolution = Resolution::new(24, 24);
        s.frames = Some((0, 2));
        s.num_scenes = 3;
        s.master_seed = 9;
        s
    }

    #[test]
    fn spec_validation() {
        let mut s = JobSpec::new("movi-basic", "/tmp/x");
        s.job_id = 5;
        s.num_jobs = 4;
        assert!(matches!(s.validate(), Err(RuntimeError::InvalidJobSpec(_))));
        let s = JobSpec::new("bogus", "/tmp/x");
        assert!(matches!(s.validate(), Err(RuntimeError::UnknownWorker(_))));
        assert!(matches!(run_job(&s), Err(RuntimeError::UnknownWorker(_))));
        let mut s = JobSpec::new("movi-basic", "/tmp/x");
        s.frames = Some((3, 1));
        assert!(s.validate().is_err());
    }

    #[test]
    fn sharding_is_round_robin() {
        let mut s = JobSpec::new("movi-basic", "/tmp/x");
        s.num_scenes = 10;
        s.num_jobs = 4;
        s.job_id = 1;
        assert_eq!(s.owned_scenes().collect::<Vec<_>>(), vec![1, 5, 9]);
        assert_eq!(s.manifest_name(), "dataset_manifest.job-0001-of-0004.json");
        let h = s.config_hash();
        s.job_id = 3;
        s.output = "/elsewhere".into();
        assert_eq!(s.config_hash(), h);
        s.master_seed = 1;
        assert_ne!(s.config_hash(), h);
    }

    #[test]
    fn run_twice_identical_and_shards_match() {
        let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m = run_job(&small("sod-multiview", a.path())).unwrap();
        assert_eq!(m.failed(), 0);
        assert_eq!(m.scenes.len(), 3);
        run_job(&small("sod-multiview", b.path())).unwrap();
        assert_eq!(tree(a.path()), tree(b.path()));
        for j in 0..2 {
            let mut s = small("sod-multiview", c.path());
            s.num_jobs = 2;
            s.job_id = j;
            s.jobs_parallel = 2;
            run_job(&s).unwrap();
        }
        let scenes = |t: BTreeMap<String, Vec<u8>>| -> BTreeMap<String, Vec<u8>> {
            t.into_iter().filter(|(k, _)| k.starts_with("scene_")).collect()
        };
        assert_eq!(scenes(tree(a.path())), scenes(tree(c.path())));
        let manifest: DatasetManifest =
            serde_json::from_slice(&std::fs::read(a.path().join("dataset_manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest, m);
    }

    #[test]
    fn scenes_are_isolated() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut s = small("texture-plane", a.path());
        s.config.insert("texture_size".into(), "16".into());
        s.num_scenes = 1;
        run_job(&s).unwrap();
        s.output = b.path().to_path_buf();
        s.num_scenes = 2;
        run_job(&s).unwrap();
        let one = tree(&a.path().join("scene_00000000"));
        assert_eq!(one, tree(&b.path().join("scene_00000000")));
        assert!(one.contains_key("cutoff_frequency_00002.kbr"));
    }

    #[test]
    fn failures_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small("movi-basic", dir.path());
        s.num_scenes = 1;
        // Far too many objects for the region: placement fails.
        for (k, v) in [("objects_min", "60"), ("objects_max", "60"), ("spawn_extent", "0.5"), ("height_max", "1.0")] {
            s.config.insert(k.into(), v.into());
        }
        let m = run_job(&s).unwrap();
        assert_eq!(m.failed(), 1);
        let msg = m.scenes[0].error.clone().unwrap();
        assert!(msg.contains("without overlap"), "{msg}");
        assert!(!dir.path().join("scene_00000000").exists());
        assert!(dir.path().join("dataset_manifest.json").exists());
    }
}
