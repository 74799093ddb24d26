use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use kubgen_ffi::*;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("kubgen.h")
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_is_valid_c_and_cxx() {
    let h = header();
    let text = std::fs::read_to_string(&h).unwrap();
    for name in ["kubgen_job_run", "kubgen_raster_read", "kubgen_camera_ray", "kubgen_eval", "KUBGEN_STATUS_SCENE_FAILED"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let st = Command::new(compiler).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&h).status();
        match st {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libkubgen_ffi.so");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no shared library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "kubgen.h"
int main(void) {
    if (kubgen_derive_scene_seed(7, 0) == kubgen_derive_scene_seed(7, 1)) return 10;
    KubgenCamera cam = {{0, 0, 5}, {1, 0, 0, 0}, 35.0, 32.0, 0.1, 100.0};
    double o[3], d[3];
    if (kubgen_camera_ray(&cam, 64, 64, 31.5, 31.5, o, d) != KUBGEN_STATUS_OK) return 11;
    if (fabs(d[2] + 1.0) > 1e-12 || o[2] != 5.0) return 12;
    double a[3] = {0, 0.5, 1}, p = 0;
    if (kubgen_psnr(a, a, 3, 1.0, &p) != KUBGEN_STATUS_OK || !isinf(p)) return 13;
    KubgenJob *job = NULL;
    if (kubgen_job_new("no-such-worker", "out", &job) != KUBGEN_STATUS_OK) return 14;
    if (kubgen_job_run(job, NULL) != KUBGEN_STATUS_UNKNOWN_WORKER) return 15;
    if (kubgen_last_error() == NULL) return 16;
    kubgen_job_free(job);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let libdir = lib.parent().unwrap();
    let st = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(libdir)
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .args(["-lkubgen_ffi", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn job_and_raster_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = cstr(dir.path().to_str().unwrap());
    unsafe {
        let mut job = ptr::null_mut();
        assert_eq!(kubgen_job_new(cstr("sod-multiview").as_ptr(), out.as_ptr(), &mut job), KubgenStatus::Ok);
        assert_eq!(kubgen_job_set_scenes(job, 2, 5), KubgenStatus::Ok);
        assert_eq!(kubgen_job_set_resolution(job, 16, 16), KubgenStatus::Ok);
        assert_eq!(kubgen_job_set_frames(job, 0, 1), KubgenStatus::Ok);
        assert_eq!(kubgen_job_set_config(job, cstr("hard").as_ptr(), cstr("true").as_ptr()), KubgenStatus::Ok);
        let mut failed = 99;
        assert_eq!(kubgen_job_run(job, &mut failed), KubgenStatus::Ok);
        assert_eq!(failed, 0);
        assert_eq!(kubgen_job_set_shard(job, 3, 2), KubgenStatus::Ok);
        assert_eq!(kubgen_job_run(job, ptr::null_mut()), KubgenStatus::InvalidJobSpec);
        kubgen_job_free(job);

        let seg = cstr(dir.path().join("scene_00000001/segmentation_00001.kbr").to_str().unwrap());
        let mut r = ptr::null_mut();
        assert_eq!(kubgen_raster_read(seg.as_ptr(), &mut r), KubgenStatus::Ok);
        let (mut w, mut h, mut c, mut t) = (0, 0, 0, 9);
        assert_eq!(kubgen_raster_shape(r, &mut w, &mut h, &mut c, &mut t), KubgenStatus::Ok);
        assert_eq!((w, h, c, t), (16, 16, 1, 1));
        let labels = std::slice::from_raw_parts(kubgen_raster_data(r) as *const u32, 256);
        assert!(labels.contains(&1));
        let mut ari = 0.0;
        assert_eq!(kubgen_fg_ari(labels.as_ptr(), labels.as_ptr(), 256, 0, &mut ari), KubgenStatus::Ok);
        assert_eq!(ari, 1.0);
        kubgen_raster_free(r);

        let scene = cstr(dir.path().join("scene_00000000").to_str().unwrap());
        let mut report = ptr::null_mut();
        assert_eq!(kubgen_eval(cstr("psnr").as_ptr(), scene.as_ptr(), scene.as_ptr(), &mut report), KubgenStatus::Ok);
        let text = CStr::from_ptr(report).to_str().unwrap().to_string();
        kubgen_string_free(report);
        assert!(text.contains("\"psnr\": \"inf\""), "{text}");
        assert_eq!(kubgen_eval(cstr("depth").as_ptr(), scene.as_ptr(), scene.as_ptr(), &mut report), KubgenStatus::InvalidArgument);

        let bad = cstr(dir.path().join("missing.kbr").to_str().unwrap());
        assert_eq!(kubgen_raster_read(bad.as_ptr(), &mut r), KubgenStatus::Io);
    }
}

#[test]
fn raster_write_from_c_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().join("g.kbr").to_str().unwrap());
    let data = [1.0f32, f32::INFINITY];
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(kubgen_raster_new_f32(2, 1, 1, data.as_ptr(), &mut r), KubgenStatus::Ok);
        assert_eq!(kubgen_raster_write(r, path.as_ptr()), KubgenStatus::Ok);
        kubgen_raster_free(r);
    }
    let bytes = std::fs::read(dir.path().join("g.kbr")).unwrap();
    assert_eq!(&bytes[..4], b"KBRR");
    assert_eq!(&bytes[24..], &[0, 0, 0x80, 0x3f, 0, 0, 0x80, 0x7f]);
}
