//! C ABI over `cocycle_lab`.
//!
//! Every fallible function returns a [`CocycleLabStatus`]; on failure the
//! message is available from [`cocycle_lab_last_error`] on the same thread.
//! Objects are opaque handles released with their `_free` function.
//! Matrices cross the boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use cocycle_lab::config::ScenarioConfig;
use cocycle_lab::growth::{growth_report, GrowthKind, GrowthOptions, Verdict};
use cocycle_lab::linalg::Mat;
use cocycle_lab::lyapunov::lyapunov_spectrum;
use cocycle_lab::scenarios::{run_scenario, Scenario};
use cocycle_lab::{Cocycle, HyperbolicAutomorphism, LabError, MatrixField, TorusPoint};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CocycleLabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotUnimodular = 3,
    NotHyperbolic = 4,
    NoConvergence = 5,
    Numerical = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

/// Hyperbolic toral automorphism.
pub struct CocycleLabAutomorphism(Arc<HyperbolicAutomorphism>);

/// Linear cocycle over an automorphism.
pub struct CocycleLabCocycle(Cocycle);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &LabError) -> CocycleLabStatus {
    use CocycleLabStatus as S;
    match e {
        LabError::NotUnimodular { .. } => S::NotUnimodular,
        LabError::NotHyperbolic { .. } => S::NotHyperbolic,
        LabError::NoConvergence { .. } => S::NoConvergence,
        LabError::InvalidArgument(_) | LabError::DimensionMismatch { .. } | LabError::LeafRadiusExceeded { .. } => S::InvalidArgument,
        LabError::Config { .. } => S::Config,
        LabError::Io(_) => S::Io,
        _ => S::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lab(LabError),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CocycleLabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CocycleLabStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CocycleLabStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            CocycleLabStatus::InvalidArgument
        }
        Ok(Err(Failure::Lab(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            CocycleLabStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Invalid(format!("{what} is not UTF-8")))
}

fn point(coords: &[f64]) -> Result<TorusPoint, Failure> {
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Failure::Invalid("point coordinates must be finite".into()));
    }
    Ok(TorusPoint::new(coords))
}

/// Message for the last call on this thread that failed; empty after a successful call.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cocycle_lab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds an automorphism from a row-major `dim`×`dim` integer matrix.
///
/// # Safety
/// `entries` must point to `dim * dim` readable values and `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_automorphism_new(
    entries: *const i64,
    dim: usize,
    out_handle: *mut *mut CocycleLabAutomorphism,
) -> CocycleLabStatus {
    guard(|| {
        let out_handle = out(out_handle, "out_handle")?;
        let flat = slice(entries, dim * dim, "entries")?;
        let rows: Vec<Vec<i64>> = flat.chunks(dim.max(1)).map(<[i64]>::to_vec).collect();
        let sys = HyperbolicAutomorphism::new(&rows)?;
        *out_handle = Box::into_raw(Box::new(CocycleLabAutomorphism(Arc::new(sys))));
        Ok(())
    })
}

/// The Arnold cat map [[2, 1], [1, 1]].
#[no_mangle]
pub extern "C" fn cocycle_lab_automorphism_cat_map() -> *mut CocycleLabAutomorphism {
    Box::into_raw(Box::new(CocycleLabAutomorphism(Arc::new(HyperbolicAutomorphism::cat_map()))))
}

/// # Safety
/// `handle` must be null or come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_automorphism_free(handle: *mut CocycleLabAutomorphism) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Torus dimension, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live automorphism.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_automorphism_dim(handle: *const CocycleLabAutomorphism) -> usize {
    handle.as_ref().map_or(0, |h| h.0.dim())
}

/// Contraction and expansion rates ν and ν̂.
///
/// # Safety
/// `handle` must be a live automorphism; `nu` and `nu_hat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_automorphism_rates(
    handle: *const CocycleLabAutomorphism,
    nu: *mut f64,
    nu_hat: *mut f64,
) -> CocycleLabStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        *out(nu, "nu")? = h.0.nu();
        *out(nu_hat, "nu_hat")? = h.0.nu_hat();
        Ok(())
    })
}

/// Applies the automorphism `n` times (negative `n` steps backwards).
///
/// # Safety
/// `x` and `y` must each hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_automorphism_step(
    handle: *const CocycleLabAutomorphism,
    x: *const f64,
    n: i64,
    y: *mut f64,
) -> CocycleLabStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let d = h.0.dim();
        let p = point(slice(x, d, "x")?)?;
        slice_mut(y, d, "y")?.copy_from_slice(&h.0.step(&p, n).coords());
        Ok(())
    })
}

/// Cocycle with the constant generator given as a row-major `d`×`d` matrix.
///
/// # Safety
/// `base` must be live, `matrix` must hold `d * d` doubles, `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_cocycle_constant(
    base: *const CocycleLabAutomorphism,
    matrix: *const f64,
    d: usize,
    out_handle: *mut *mut CocycleLabCocycle,
) -> CocycleLabStatus {
    guard(|| {
        let out_handle = out(out_handle, "out_handle")?;
        let base = deref(base, "base")?;
        if d == 0 {
            return Err(Failure::Invalid("fiber dimension must be positive".into()));
        }
        let a = Mat::from_row_slice(d, d, slice(matrix, d * d, "matrix")?);
        let field = MatrixField::constant(a)?;
        *out_handle = Box::into_raw(Box::new(CocycleLabCocycle(Cocycle::new(base.0.clone(), Arc::new(field)))));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_cocycle_free(handle: *mut CocycleLabCocycle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Fiber dimension, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live cocycle.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_cocycle_dim(handle: *const CocycleLabCocycle) -> usize {
    handle.as_ref().map_or(0, |h| h.0.dim())
}

/// Writes the row-major iterate A^n(x).
///
/// # Safety
/// `x` must hold the torus dimension in doubles and `out_matrix` must hold `d * d`.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_cocycle_iterate(
    handle: *const CocycleLabCocycle,
    x: *const f64,
    n: i64,
    out_matrix: *mut f64,
) -> CocycleLabStatus {
    guard(|| {
        let c = deref(handle, "handle")?;
        let d = c.0.dim();
        let p = point(slice(x, c.0.base.dim(), "x")?)?;
        let m = c.0.iterate(&p, n)?;
        let dst = slice_mut(out_matrix, d * d, "out_matrix")?;
        for i in 0..d {
            for j in 0..d {
                dst[i * d + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Lyapunov exponents along the orbit of `x`, in decreasing order.
///
/// # Safety
/// `x` must hold the torus dimension in doubles and `exponents` must hold `d`.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_lyapunov(
    handle: *const CocycleLabCocycle,
    x: *const f64,
    n_steps: usize,
    qr_period: usize,
    exponents: *mut f64,
) -> CocycleLabStatus {
    guard(|| {
        let c = deref(handle, "handle")?;
        let p = point(slice(x, c.0.base.dim(), "x")?)?;
        let s = lyapunov_spectrum(&c.0, &p, n_steps, qr_period)?;
        slice_mut(exponents, s.len(), "exponents")?.copy_from_slice(&s);
        Ok(())
    })
}

/// Fiber bunching estimate at exponent `beta`; `passed` is set only on a pass verdict.
///
/// # Safety
/// `handle` must be live; `theta_hat` and `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_fiber_bunching(
    handle: *const CocycleLabCocycle,
    beta: f64,
    theta_hat: *mut f64,
    passed: *mut bool,
) -> CocycleLabStatus {
    guard(|| {
        let c = deref(handle, "handle")?;
        let rep = growth_report(&c.0, GrowthKind::FiberBunching, &GrowthOptions { beta, ..GrowthOptions::default() })?;
        *out(theta_hat, "theta_hat")? = rep.theta_hat;
        *out(passed, "passed")? = rep.verdict == Verdict::Pass;
        Ok(())
    })
}

/// Runs a named scenario and writes its CSV files into `out_dir`.
/// A null `config_path` uses the default configuration.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cocycle_lab_run_scenario(
    scenario: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
    serial: bool,
    passed: *mut bool,
) -> CocycleLabStatus {
    guard(|| {
        let passed = out(passed, "passed")?;
        let sc: Scenario = string(scenario, "scenario")?.parse()?;
        let cfg = if config_path.is_null() {
            ScenarioConfig::default()
        } else {
            ScenarioConfig::load(&PathBuf::from(string(config_path, "config_path")?))?
        };
        let dir = PathBuf::from(string(out_dir, "out_dir")?);
        let outcome = run_scenario(sc, &cfg, serial)?;
        outcome.write(&dir)?;
        *passed = outcome.passed();
        Ok(())
    })
}
