//! C ABI for kubgen.
//!
//! Every fallible function returns a [`KubgenStatus`]; on failure the
//! message is available from [`kubgen_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kubgen::export::{read_raster, write_raster, ExportError, Raster, RasterData};
use kubgen::math::{arr3, quat_from_wxyz, vec3};
use kubgen::metrics::{self, EvalTask, MetricsError};
use kubgen::rng::{self, Rng};
use kubgen::runtime::{run_job, JobSpec, RuntimeError};
use kubgen::scene::{PerspectiveCamera, Resolution};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KubgenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownWorker = 3,
    InvalidJobSpec = 4,
    Io = 5,
    Format = 6,
    Metric = 7,
    /// The job ran but at least one scene failed; see the manifest.
    SceneFailed = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: KubgenStatus, msg: impl ToString) -> KubgenStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> KubgenStatus) -> KubgenStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(KubgenStatus::Panic, "internal panic"))
}

fn export_status(e: &ExportError) -> KubgenStatus {
    match e {
        ExportError::Io { .. } | ExportError::IncompleteRecord(_) => KubgenStatus::Io,
        _ => KubgenStatus::Format,
    }
}

fn runtime_status(e: &RuntimeError) -> KubgenStatus {
    match e {
        RuntimeError::UnknownWorker(_) => KubgenStatus::UnknownWorker,
        RuntimeError::InvalidJobSpec(_) | RuntimeError::InvalidCutoff(_) => KubgenStatus::InvalidJobSpec,
        RuntimeError::Io(_) => KubgenStatus::Io,
        RuntimeError::Export(e) => export_status(e),
        _ => KubgenStatus::InvalidArgument,
    }
}

fn metrics_status(e: &MetricsError) -> KubgenStatus {
    match e {
        MetricsError::Export(e) => export_status(e),
        _ => KubgenStatus::Metric,
    }
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, KubgenStatus> {
    if s.is_null() {
        return Err(fail(KubgenStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(KubgenStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to `len` readable elements.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], KubgenStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(KubgenStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(KubgenStatus::NullPointer, concat!(stringify!($p), " is null"));
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the
/// next kubgen call on the same thread.
#[no_mangle]
pub extern "C" fn kubgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kubgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Seed of scene `scene_index` under `master_seed`.
#[no_mangle]
pub extern "C" fn kubgen_derive_scene_seed(master_seed: u64, scene_index: u64) -> u64 {
    rng::derive_scene_seed(master_seed, scene_index)
}

pub struct KubgenRng(Rng);

#[no_mangle]
pub extern "C" fn kubgen_rng_new(seed: u64) -> *mut KubgenRng {
    Box::into_raw(Box::new(KubgenRng(Rng::new(seed))))
}

/// # Safety
/// `rng` is a live handle from [`kubgen_rng_new`].
#[no_mangle]
pub unsafe extern "C" fn kubgen_rng_next_u64(rng: *mut KubgenRng) -> u64 {
    (*rng).0.next_u64()
}

/// Uniform in `[0, 1)` with 53 bits of precision.
///
/// # Safety
/// `rng` is a live handle from [`kubgen_rng_new`].
#[no_mangle]
pub unsafe extern "C" fn kubgen_rng_next_f64(rng: *mut KubgenRng) -> f64 {
    (*rng).0.next_f64()
}

/// # Safety
/// `rng` is null or a handle from [`kubgen_rng_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kubgen_rng_free(rng: *mut KubgenRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Pinhole camera; `quaternion` is `[w, x, y, z]`, looking along local −Z.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct KubgenCamera {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    pub focal_length: f64,
    pub sensor_width: f64,
    pub near_clip: f64,
    pub far_clip: f64,
}

/// Primary ray through image point `(x, y)`; integers are pixel centres.
///
/// # Safety
/// `camera` is readable; `origin` and `direction` point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kubgen_camera_ray(
    camera: *const KubgenCamera,
    width: u32,
    height: u32,
    x: f64,
    y: f64,
    origin: *mut f64,
    direction: *mut f64,
) -> KubgenStatus {
    guard(|| {
        out_ptr!(camera);
        out_ptr!(origin);
        out_ptr!(direction);
        let c = &*camera;
        let cam = PerspectiveCamera {
            position: vec3(c.position),
            orientation: quat_from_wxyz(c.quaternion),
            focal_length: c.focal_length,
            sensor_width: c.sensor_width,
            near_clip: c.near_clip,
            far_clip: c.far_clip,
        };
        if cam.validate().is_err() || width == 0 || height == 0 {
            return fail(KubgenStatus::InvalidArgument, "invalid camera or resolution");
        }
        let r = cam.generate_ray(x, y, Resolution::new(width, height));
        ptr::copy_nonoverlapping(arr3(&r.origin).as_ptr(), origin, 3);
        ptr::copy_nonoverlapping(arr3(&r.direction).as_ptr(), direction, 3);
        KubgenStatus::Ok
    })
}

pub struct KubgenJob(JobSpec);

/// New job for `worker` writing under `out`, with one scene, seed 0, a
/// single shard and 128x128 output.
///
/// # Safety
/// `worker` and `out` are NUL-terminated; `job` points to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_new(worker: *const c_char, out: *const c_char, job: *mut *mut KubgenJob) -> KubgenStatus {
    guard(|| {
        out_ptr!(job);
        let worker = tri!(str_arg(worker, "worker"));
        let out = tri!(str_arg(out, "out"));
        *job = Box::into_raw(Box::new(KubgenJob(JobSpec::new(worker, PathBuf::from(out)))));
        KubgenStatus::Ok
    })
}

/// # Safety
/// `job` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_scenes(job: *mut KubgenJob, num_scenes: u64, master_seed: u64) -> KubgenStatus {
    out_ptr!(job);
    let s = &mut (*job).0;
    s.num_scenes = num_scenes;
    s.master_seed = master_seed;
    KubgenStatus::Ok
}

/// # Safety
/// `job` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_shard(job: *mut KubgenJob, job_id: u32, num_jobs: u32) -> KubgenStatus {
    out_ptr!(job);
    let s = &mut (*job).0;
    s.job_id = job_id;
    s.num_jobs = num_jobs;
    KubgenStatus::Ok
}

/// # Safety
/// `job` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_resolution(job: *mut KubgenJob, width: u32, height: u32) -> KubgenStatus {
    out_ptr!(job);
    (*job).0.resolution = Resolution::new(width, height);
    KubgenStatus::Ok
}

/// Inclusive frame range.
///
/// # Safety
/// `job` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_frames(job: *mut KubgenJob, frame_start: i32, frame_end: i32) -> KubgenStatus {
    out_ptr!(job);
    (*job).0.frames = Some((frame_start, frame_end));
    KubgenStatus::Ok
}

/// # Safety
/// `job` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_parallelism(job: *mut KubgenJob, jobs_parallel: usize) -> KubgenStatus {
    out_ptr!(job);
    (*job).0.jobs_parallel = jobs_parallel;
    KubgenStatus::Ok
}

/// Sets a worker option, as `--config key=value` would.
///
/// # Safety
/// `job` is a live handle; `key` and `value` are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_set_config(job: *mut KubgenJob, key: *const c_char, value: *const c_char) -> KubgenStatus {
    out_ptr!(job);
    let key = tri!(str_arg(key, "key"));
    let value = tri!(str_arg(value, "value"));
    (*job).0.config.insert(key.to_string(), value.to_string());
    KubgenStatus::Ok
}

/// Runs the job. `failed_scenes` (nullable) receives the number of
/// failed scenes; any failure gives `SCENE_FAILED`.
///
/// # Safety
/// `job` is a live handle; `failed_scenes` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_run(job: *const KubgenJob, failed_scenes: *mut u64) -> KubgenStatus {
    guard(|| {
        out_ptr!(job);
        match run_job(&(*job).0) {
            Ok(m) => {
                let failed = m.failed() as u64;
                if !failed_scenes.is_null() {
                    *failed_scenes = failed;
                }
                if failed == 0 {
                    KubgenStatus::Ok
                } else {
                    fail(KubgenStatus::SceneFailed, format!("{failed} scene(s) failed"))
                }
            }
            Err(e) => fail(runtime_status(&e), &e),
        }
    })
}

/// # Safety
/// `job` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kubgen_job_free(job: *mut KubgenJob) {
    if !job.is_null() {
        drop(Box::from_raw(job));
    }
}

pub struct KubgenRaster(Raster);

/// # Safety
/// `path` is NUL-terminated; `raster` points to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_read(path: *const c_char, raster: *mut *mut KubgenRaster) -> KubgenStatus {
    guard(|| {
        out_ptr!(raster);
        let path = tri!(str_arg(path, "path"));
        match read_raster(path.as_ref()) {
            Ok(r) => {
                *raster = Box::into_raw(Box::new(KubgenRaster(r)));
                KubgenStatus::Ok
            }
            Err(e) => fail(export_status(&e), &e),
        }
    })
}

/// Copies `width * height * channels` values into a new f32 raster.
///
/// # Safety
/// `data` points to that many floats; `raster` points to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_new_f32(
    width: u32,
    height: u32,
    channels: u32,
    data: *const f32,
    raster: *mut *mut KubgenRaster,
) -> KubgenStatus {
    guard(|| {
        out_ptr!(raster);
        let n = width as usize * height as usize * channels as usize;
        let values = tri!(slice_arg(data, n, "data"));
        match Raster::f32(width, height, channels, values.to_vec()) {
            Ok(r) => {
                *raster = Box::into_raw(Box::new(KubgenRaster(r)));
                KubgenStatus::Ok
            }
            Err(e) => fail(KubgenStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `raster` is a live handle; `path` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_write(raster: *const KubgenRaster, path: *const c_char) -> KubgenStatus {
    guard(|| {
        out_ptr!(raster);
        let path = tri!(str_arg(path, "path"));
        match write_raster(path.as_ref(), &(*raster).0) {
            Ok(()) => KubgenStatus::Ok,
            Err(e) => fail(export_status(&e), &e),
        }
    })
}

/// Writes width, height, channels and the dtype code (0 f32, 1 u32,
/// 2 u16, 3 u8). Any output pointer may be null.
///
/// # Safety
/// `raster` is a live handle; non-null outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_shape(
    raster: *const KubgenRaster,
    width: *mut u32,
    height: *mut u32,
    channels: *mut u32,
    dtype: *mut u8,
) -> KubgenStatus {
    out_ptr!(raster);
    let r = &(*raster).0;
    for (p, v) in [(width, r.width), (height, r.height), (channels, r.channels)] {
        if !p.is_null() {
            *p = v;
        }
    }
    if !dtype.is_null() {
        *dtype = r.dtype() as u8;
    }
    KubgenStatus::Ok
}

/// Borrowed pointer to the row-major, channel-interleaved payload in
/// native element type. Valid until the raster is freed.
///
/// # Safety
/// `raster` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_data(raster: *const KubgenRaster) -> *const u8 {
    if raster.is_null() {
        return ptr::null();
    }
    match &(*raster).0.data {
        RasterData::F32(v) => v.as_ptr() as *const u8,
        RasterData::U32(v) => v.as_ptr() as *const u8,
        RasterData::U16(v) => v.as_ptr() as *const u8,
        RasterData::U8(v) => v.as_ptr(),
    }
}

/// # Safety
/// `raster` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kubgen_raster_free(raster: *mut KubgenRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

/// Adjusted Rand index over pixels whose ground-truth label is not
/// `background`.
///
/// # Safety
/// `gt` and `pred` point to `len` labels; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kubgen_fg_ari(gt: *const u32, pred: *const u32, len: usize, background: u32, out: *mut f64) -> KubgenStatus {
    guard(|| {
        out_ptr!(out);
        let gt = tri!(slice_arg(gt, len, "gt"));
        let pred = tri!(slice_arg(pred, len, "pred"));
        match metrics::fg_ari(gt, pred, background) {
            Ok(v) => {
                *out = v;
                KubgenStatus::Ok
            }
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}

/// Average end-point error over `num_pixels` interleaved `(dx, dy)` pairs.
/// A null `mask` selects every pixel; otherwise nonzero entries are kept.
///
/// # Safety
/// `pred` and `gt` point to `2 * num_pixels` floats, `mask` is null or
/// points to `num_pixels` bytes, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kubgen_aepe(
    pred: *const f32,
    gt: *const f32,
    mask: *const u8,
    num_pixels: usize,
    out: *mut f64,
) -> KubgenStatus {
    guard(|| {
        out_ptr!(out);
        let pred = tri!(slice_arg(pred, 2 * num_pixels, "pred"));
        let gt = tri!(slice_arg(gt, 2 * num_pixels, "gt"));
        let mask: Vec<bool> = if mask.is_null() {
            vec![true; num_pixels]
        } else {
            tri!(slice_arg(mask, num_pixels, "mask")).iter().map(|m| *m != 0).collect()
        };
        match metrics::aepe(pred, gt, &mask) {
            Ok(v) => {
                *out = v;
                KubgenStatus::Ok
            }
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}

/// PSNR in dB; identical inputs give positive infinity.
///
/// # Safety
/// `a` and `b` point to `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kubgen_psnr(a: *const f64, b: *const f64, len: usize, max_val: f64, out: *mut f64) -> KubgenStatus {
    guard(|| {
        out_ptr!(out);
        let a = tri!(slice_arg(a, len, "a"));
        let b = tri!(slice_arg(b, len, "b"));
        match metrics::psnr(a, b, max_val) {
            Ok(v) => {
                *out = v;
                KubgenStatus::Ok
            }
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}

/// Same report as `kubgen eval`, as a JSON string released with
/// [`kubgen_string_free`]. `task` is flow, segmentation, tracks or psnr.
///
/// # Safety
/// String arguments are NUL-terminated; `report` points to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn kubgen_eval(
    task: *const c_char,
    pred: *const c_char,
    gt: *const c_char,
    report: *mut *mut c_char,
) -> KubgenStatus {
    guard(|| {
        out_ptr!(report);
        let task = tri!(str_arg(task, "task"));
        let pred = tri!(str_arg(pred, "pred"));
        let gt = tri!(str_arg(gt, "gt"));
        let task = match task {
            "flow" => EvalTask::Flow,
            "segmentation" => EvalTask::Segmentation,
            "tracks" => EvalTask::Tracks,
            "psnr" => EvalTask::Psnr,
            _ => return fail(KubgenStatus::InvalidArgument, format!("unknown task {task:?}")),
        };
        match metrics::evaluate(task, pred.as_ref(), gt.as_ref()) {
            Ok(v) => {
                let text = serde_json::to_string_pretty(&v).expect("json value");
                *report = CString::new(text).expect("json has no NUL").into_raw();
                KubgenStatus::Ok
            }
            Err(e) => fail(metrics_status(&e), e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(kubgen_last_error()).to_string_lossy().into_owned() }
    }

    #[test]
    fn seeds_match_core() {
        assert_eq!(kubgen_derive_scene_seed(7, 3), rng::derive_scene_seed(7, 3));
        let r = kubgen_rng_new(11);
        let mut core = Rng::new(11);
        unsafe {
            assert_eq!(kubgen_rng_next_u64(r), core.next_u64());
            assert_eq!(kubgen_rng_next_f64(r), core.next_f64());
            kubgen_rng_free(r);
        }
    }

    #[test]
    fn null_arguments_are_reported() {
        let mut out = 0.0;
        let st = unsafe { kubgen_psnr(ptr::null(), ptr::null(), 3, 1.0, &mut out) };
        assert_eq!(st, KubgenStatus::NullPointer);
        assert!(last_error().contains("null"));
        let st = unsafe { kubgen_fg_ari([1u32].as_ptr(), [1u32].as_ptr(), 1, 0, ptr::null_mut()) };
        assert_eq!(st, KubgenStatus::NullPointer);
    }

    #[test]
    fn metric_errors_map_to_status() {
        let gt = [0u32, 0];
        let mut out = 0.0;
        let st = unsafe { kubgen_fg_ari(gt.as_ptr(), gt.as_ptr(), 2, 0, &mut out) };
        assert_eq!(st, KubgenStatus::Metric);
        assert!(!last_error().is_empty());
    }
}
