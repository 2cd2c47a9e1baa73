use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sbmo_ffi::*;

fn last_error() -> String {
    let p = sbmo_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn environment_lifecycle() {
    let (lo, hi) = ([-1.0; 3], [1.0; 3]);
    let mut env = ptr::null_mut();
    let s = unsafe { sbmo_environment_new(7, 0.1, 1.0, lo.as_ptr(), hi.as_ptr(), 3, &mut env) };
    assert_eq!(s, SbmoStatus::Ok);
    let n = unsafe { sbmo_environment_len(env) };
    assert!(n > 0);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("e.sbmo").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sbmo_environment_save(env, path.as_ptr()) }, SbmoStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { sbmo_environment_load(path.as_ptr(), &mut back) }, SbmoStatus::Ok);
    assert_eq!(unsafe { sbmo_environment_len(back) }, n);

    let mut hit = false;
    let x = [0.0; 3];
    assert_eq!(unsafe { sbmo_environment_covers(back, x.as_ptr(), 3, &mut hit) }, SbmoStatus::Ok);
    let mut hit2 = !hit;
    assert_eq!(unsafe { sbmo_environment_covers(env, x.as_ptr(), 3, &mut hit2) }, SbmoStatus::Ok);
    assert_eq!(hit, hit2);
    assert_eq!(unsafe { sbmo_environment_covers(env, x.as_ptr(), 2, &mut hit) }, SbmoStatus::InvalidArgument);
    assert!(last_error().contains("dimension"));

    unsafe {
        sbmo_environment_free(env);
        sbmo_environment_free(back);
        sbmo_environment_free(ptr::null_mut());
    }
    assert_eq!(unsafe { sbmo_environment_len(ptr::null()) }, 0);
}

#[test]
fn errors_are_codes() {
    let mut env = ptr::null_mut();
    let lo = [0.0; 2];
    let s = unsafe { sbmo_environment_new(1, 0.7, 1.0, lo.as_ptr(), lo.as_ptr(), 2, &mut env) };
    assert_eq!(s, SbmoStatus::InvalidArgument);
    assert!(env.is_null());
    let s = unsafe { sbmo_environment_new(1, 0.1, 1.0, ptr::null(), lo.as_ptr(), 2, &mut env) };
    assert_eq!(s, SbmoStatus::NullPointer);
    assert!(last_error().contains("lo"));

    let missing = CString::new("/nonexistent/env.sbmo").unwrap();
    assert_eq!(unsafe { sbmo_environment_load(missing.as_ptr(), &mut env) }, SbmoStatus::Io);

    let bad = CString::new(r#"{"experiment": "nope"}"#).unwrap();
    let out = CString::new("/tmp").unwrap();
    assert_eq!(unsafe { sbmo_run_experiment(bad.as_ptr(), out.as_ptr()) }, SbmoStatus::Config);
    assert!(last_error().contains("experiment"));
}

#[test]
fn solver_and_masses() {
    let (lo, hi) = ([-5.0; 2], [5.0; 2]);
    let mut grid = ptr::null_mut();
    let s = unsafe { sbmo_solve_constant(lo.as_ptr(), hi.as_ptr(), 2, 0.0, 1.0, 1.0, 0.01, 0.25, &mut grid) };
    assert_eq!(s, SbmoStatus::Ok);
    let mut w = f64::NAN;
    let x = [0.0; 2];
    assert_eq!(unsafe { sbmo_grid_value(grid, 0.0, x.as_ptr(), 2, &mut w) }, SbmoStatus::Ok);
    assert!((w - 0.5).abs() < 1e-3, "{w}");
    unsafe { sbmo_grid_free(grid) };

    let mut masses = vec![0.0; 2000];
    let s = unsafe { sbmo_total_masses(3, 1e3, 0.0, 1.0, 0.5, masses.len(), masses.as_mut_ptr()) };
    assert_eq!(s, SbmoStatus::Ok);
    let mean = masses.iter().sum::<f64>() / masses.len() as f64;
    // variance 2ty = 1 over 2000 replicates
    assert!((mean - 1.0).abs() < 4.0 * (1.0f64 / 2000.0).sqrt(), "{mean}");
}

#[test]
fn run_experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(r#"{"experiment": "feller-moments", "replicates": 4000}"#).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let s = unsafe { sbmo_run_experiment(cfg.as_ptr(), out.as_ptr()) };
    assert!(matches!(s, SbmoStatus::Ok | SbmoStatus::ChecksFailed), "{s:?}");
    for f in ["summary.csv", "raw.jsonl", "report.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sbmo_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a small C program against the generated header and
/// the static library.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("sbmo.h").exists());
    let test_exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/abi-xxxx -> target/<profile>
    let profile_dir = test_exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libsbmo_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "sbmo.h"
int main(void) {
    double lo[3] = {-1, -1, -1}, hi[3] = {1, 1, 1};
    SbmoEnvironment *env = NULL;
    if (sbmo_environment_new(3, 0.1, 1.0, lo, hi, 3, &env) != SBMO_STATUS_OK) return 1;
    size_t n = sbmo_environment_len(env);
    sbmo_environment_free(env);
    if (sbmo_environment_new(3, 0.9, 1.0, lo, hi, 3, &env) != SBMO_STATUS_INVALID_ARGUMENT) return 2;
    if (sbmo_last_error() == NULL) return 3;
    printf("%zu\n", n);
    return n > 0 ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
}
