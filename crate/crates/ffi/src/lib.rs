//! C interface to `sbm_obstacles`: obstacle environments, the log-Laplace
//! solver, total-mass sampling and config-driven experiment runs.
//!
//! Every fallible function returns an [`SbmoStatus`]; on failure the message
//! is kept per thread and can be read with [`sbmo_last_error`]. Handles are
//! opaque, created by `*_new`/`*_load`/`*_solve` functions and released with
//! the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;
use std::slice;

use sbm_obstacles::geometry::Aabb;
use sbm_obstacles::harness::{run_to, ExperimentConfig};
use sbm_obstacles::obstacle::{generate_environment, Environment};
use sbm_obstacles::rng::RandomSource;
use sbm_obstacles::solver::{solve, GridFunction, SolveSpec};
use sbm_obstacles::stochastic::IntensityField;
use sbm_obstacles::superprocess::{sample_total_masses, LaplaceProbe};
use sbm_obstacles::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbmoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    Coverage = 4,
    NonConvergence = 5,
    Config = 6,
    Io = 7,
    Format = 8,
    /// Ran to completion, but a judged row failed its threshold.
    ChecksFailed = 9,
    Internal = 10,
    Panic = 11,
}

/// A generated or loaded obstacle environment.
pub struct SbmoEnvironment(Environment);

/// A solved `w(t, x)` on a grid.
pub struct SbmoGrid(GridFunction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SbmoStatus {
    match e {
        Error::InvalidArgument(_) | Error::Singularity(_) | Error::SupportViolation(_) | Error::GridMismatch(_) => {
            SbmoStatus::InvalidArgument
        }
        Error::Unsupported(_) => SbmoStatus::Unsupported,
        Error::CoverageViolation(_) => SbmoStatus::Coverage,
        Error::NonConvergence { .. } => SbmoStatus::NonConvergence,
        Error::Config { .. } => SbmoStatus::Config,
        Error::Io(_) => SbmoStatus::Io,
        Error::Format(_) | Error::Json(_) => SbmoStatus::Format,
        Error::GenealogyMismatch(_) | Error::MissingSnapshot(_) => SbmoStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<SbmoStatus, (SbmoStatus, String)>) -> SbmoStatus {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside sbmo".into());
            SbmoStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SbmoStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SbmoStatus, String) {
    (SbmoStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn floats<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], (SbmoStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: the caller promises `n` readable doubles at `p`.
    Ok(unsafe { slice::from_raw_parts(p, n) })
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SbmoStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    // SAFETY: the caller promises a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (SbmoStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn region(lo: &[f64], hi: &[f64]) -> Result<Aabb, (SbmoStatus, String)> {
    Aabb::new(lo.to_vec(), hi.to_vec()).map_err(lib)
}

/// The message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbmo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbmo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Poisson obstacles of radius `eps` with constant density `nu` (scaled by
/// `s_d(eps)`) in the box `[lo, hi]` of dimension `dim`.
///
/// # Safety
/// `lo` and `hi` point to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_new(
    seed: u64,
    eps: f64,
    nu: f64,
    lo: *const f64,
    hi: *const f64,
    dim: usize,
    out: *mut *mut SbmoEnvironment,
) -> SbmoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = region(unsafe { floats(lo, dim, "lo")? }, unsafe { floats(hi, dim, "hi")? })?;
        let c = IntensityField::constant(nu).map_err(lib)?;
        let env = generate_environment(&mut RandomSource::new(seed, 0), eps, &c, &b, dim, None).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SbmoEnvironment(env))) };
        Ok(SbmoStatus::Ok)
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_load(path: *const c_char, out: *mut *mut SbmoEnvironment) -> SbmoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = unsafe { text(path, "path")? };
        let (env, _) = Environment::load(Path::new(p)).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SbmoEnvironment(env))) };
        Ok(SbmoStatus::Ok)
    })
}

/// # Safety
/// `env` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_save(env: *const SbmoEnvironment, path: *const c_char) -> SbmoStatus {
    guard(|| {
        let env = unsafe { env.as_ref() }.ok_or_else(|| null("env"))?;
        let p = unsafe { text(path, "path")? };
        env.0.save(Path::new(p), Default::default()).map_err(lib)?;
        Ok(SbmoStatus::Ok)
    })
}

/// Number of obstacle centres; 0 for a null handle.
///
/// # Safety
/// `env` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_len(env: *const SbmoEnvironment) -> usize {
    unsafe { env.as_ref() }.map_or(0, |e| e.0.len())
}

/// Whether `x` lies in the union of obstacles.
///
/// # Safety
/// `env` is a live handle; `x` points to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_covers(
    env: *const SbmoEnvironment,
    x: *const f64,
    dim: usize,
    out: *mut bool,
) -> SbmoStatus {
    guard(|| {
        let env = unsafe { env.as_ref() }.ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if dim != env.0.dim() {
            return Err((SbmoStatus::InvalidArgument, format!("point has dimension {dim}, environment {}", env.0.dim())));
        }
        let x = unsafe { floats(x, dim, "x")? };
        unsafe { *out = env.0.covers(x) };
        Ok(SbmoStatus::Ok)
    })
}

/// # Safety
/// `env` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbmo_environment_free(env: *mut SbmoEnvironment) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Solves the rate-killed log-Laplace equation with `f = lambda` at `t`,
/// constant density `nu`, on the box `[lo, hi]`.
///
/// # Safety
/// `lo` and `hi` point to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sbmo_solve_constant(
    lo: *const f64,
    hi: *const f64,
    dim: usize,
    nu: f64,
    lambda: f64,
    t: f64,
    dt: f64,
    spacing: f64,
    out: *mut *mut SbmoGrid,
) -> SbmoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = region(unsafe { floats(lo, dim, "lo")? }, unsafe { floats(hi, dim, "hi")? })?;
        let probe = LaplaceProbe::constant(t, lambda).map_err(lib)?;
        let c = IntensityField::constant(nu).map_err(lib)?;
        let w = solve(&SolveSpec::star(probe, c, b, dt, spacing)).map_err(lib)?;
        unsafe { *out = Box::into_raw(Box::new(SbmoGrid(w))) };
        Ok(SbmoStatus::Ok)
    })
}

/// `w(t, x)`; zero outside the box or past the last probe time.
///
/// # Safety
/// `grid` is a live handle; `x` points to `dim` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sbmo_grid_value(
    grid: *const SbmoGrid,
    t: f64,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SbmoStatus {
    guard(|| {
        let g = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if dim != g.0.dim() {
            return Err((SbmoStatus::InvalidArgument, format!("point has dimension {dim}, grid {}", g.0.dim())));
        }
        let x = unsafe { floats(x, dim, "x")? };
        unsafe { *out = g.0.value(t, x) };
        Ok(SbmoStatus::Ok)
    })
}

/// # Safety
/// `grid` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sbmo_grid_write_csv(grid: *const SbmoGrid, path: *const c_char) -> SbmoStatus {
    guard(|| {
        let g = unsafe { grid.as_ref() }.ok_or_else(|| null("grid"))?;
        let p = unsafe { text(path, "path")? };
        let f = std::fs::File::create(p).map_err(|e| lib(e.into()))?;
        g.0.write_csv(std::io::BufWriter::new(f)).map_err(lib)?;
        Ok(SbmoStatus::Ok)
    })
}

/// # Safety
/// `grid` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbmo_grid_free(grid: *mut SbmoGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Fills `out[0..replicates]` with total masses at time `t` of the critical
/// branching system with `n` particles per unit mass, initial mass `y` and
/// killing rate `kappa`.
///
/// # Safety
/// `out` points to `replicates` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sbmo_total_masses(
    seed: u64,
    n: f64,
    kappa: f64,
    y: f64,
    t: f64,
    replicates: usize,
    out: *mut f64,
) -> SbmoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let masses = sample_total_masses(&RandomSource::new(seed, 0), n, kappa, y, t, replicates).map_err(lib)?;
        unsafe { slice::from_raw_parts_mut(out, replicates) }.copy_from_slice(&masses);
        Ok(SbmoStatus::Ok)
    })
}

/// Runs the experiment described by a JSON config and writes its report
/// files into `out_dir`. Returns `ChecksFailed` when a judged row failed.
///
/// # Safety
/// `config_json` and `out_dir` are NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sbmo_run_experiment(config_json: *const c_char, out_dir: *const c_char) -> SbmoStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(unsafe { text(config_json, "config_json")? }).map_err(lib)?;
        let dir = unsafe { text(out_dir, "out_dir")? };
        let outcome = run_to(&cfg, Path::new(dir)).map_err(lib)?;
        if outcome.passed() {
            Ok(SbmoStatus::Ok)
        } else {
            Err((SbmoStatus::ChecksFailed, format!("{} row(s) failed their thresholds", outcome.failures().len())))
        }
    })
}
