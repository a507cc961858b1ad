//! C ABI over `otfluct`.
//!
//! Objects are opaque handles created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns an [`OtfStatus`]; on
//! failure [`otf_last_error`] describes the most recent error on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use otfluct::Error;
use otfluct::branching_system::occupation::SampleRequest;
use otfluct::branching_system::sim::{Boundary, SimOptions, SimulationBox};
use otfluct::branching_system::{Regime, SystemParams, fluctuation_sample};
use otfluct::limit_covariance::{LimitModel, QuadratureConfig};
use otfluct::osrf_fields::{FieldSpec, Which, cov_field};
use otfluct::rng::StreamKey;
use otfluct::stable_motion::StabilityVector;
use otfluct::test_function::TestFunction;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    ResourceBudget = 3,
    Quadrature = 4,
    NotPsd = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfRegime {
    Large = 0,
    Critical = 1,
    Intermediate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfFieldKind {
    Y1 = 0,
    Y2 = 1,
}

/// Branching system parameters.
pub struct OtfSystem(SystemParams);

/// Spatial test function.
pub struct OtfTestFunction(TestFunction);

/// Limit covariances of one system and a family of test functions.
pub struct OtfLimitModel(LimitModel);

/// Operator-scaling Gaussian field.
pub struct OtfField(FieldSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OtfStatus {
    match e {
        Error::InvalidParameter(_) => OtfStatus::InvalidParameter,
        Error::ResourceBudget { .. } => OtfStatus::ResourceBudget,
        Error::Quadrature(_) => OtfStatus::Quadrature,
        Error::NotPsd(_) => OtfStatus::NotPsd,
        Error::Config(_) => OtfStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => OtfStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OtfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OtfStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            OtfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            OtfStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null only when `n` is zero, else point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

/// # Safety
/// `p` must be null or valid for `n` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { out.write(v) };
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn otf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn otf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a system with stability indices `alphas[0..dim]`, branching rate
/// `gamma`, degeneracy `theta` and time scale `n`.
///
/// # Safety
/// `alphas` must hold `dim` values and `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_new(
    alphas: *const f64,
    dim: usize,
    gamma: f64,
    theta: f64,
    n: f64,
    out: *mut *mut OtfSystem,
) -> OtfStatus {
    guard(|| {
        let a = unsafe { slice(alphas, dim, "alphas") }?;
        let p = SystemParams::new(StabilityVector::new(a.to_vec())?, gamma, theta, n)?;
        unsafe { put(out, Box::into_raw(Box::new(OtfSystem(p))), "out") }
    })
}

/// # Safety
/// `system` must be null or a handle from [`otf_system_new`] not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_free(system: *mut OtfSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// # Safety
/// `system` must be a live handle and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_alpha_bar(system: *const OtfSystem, out: *mut f64) -> OtfStatus {
    guard(|| {
        let s = unsafe { handle(system, "system") }?;
        unsafe { put(out, s.0.sv.alpha_bar(), "out") }
    })
}

/// # Safety
/// `system` must be a live handle and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_regime(system: *const OtfSystem, out: *mut OtfRegime) -> OtfStatus {
    guard(|| {
        let s = unsafe { handle(system, "system") }?;
        let r = match s.0.regime()? {
            Regime::Large => OtfRegime::Large,
            Regime::Critical => OtfRegime::Critical,
            Regime::Intermediate => OtfRegime::Intermediate,
        };
        unsafe { put(out, r, "out") }
    })
}

/// Norming `F_n` of the system's regime.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_norming(system: *const OtfSystem, out: *mut f64) -> OtfStatus {
    guard(|| {
        let s = unsafe { handle(system, "system") }?;
        unsafe { put(out, s.0.norming(), "out") }
    })
}

/// Mean density factor `f_n(s)`: `E⟨N(s), φ⟩ = f_n(s) ∫φ`.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_system_mean_factor(system: *const OtfSystem, s: f64, out: *mut f64) -> OtfStatus {
    guard(|| {
        let p = unsafe { handle(system, "system") }?;
        unsafe { put(out, p.0.mean_factor_f(s)?, "out") }
    })
}

/// Gaussian bump `Π exp(-(x_k - c_k)² / (2 w_k²))`.
///
/// # Safety
/// `center` and `widths` must hold `dim` values and `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_test_function_gaussian(
    center: *const f64,
    widths: *const f64,
    dim: usize,
    out: *mut *mut OtfTestFunction,
) -> OtfStatus {
    guard(|| {
        let c = unsafe { slice(center, dim, "center") }?;
        let w = unsafe { slice(widths, dim, "widths") }?;
        let f = TestFunction::gaussian(c.to_vec(), w.to_vec())?;
        unsafe { put(out, Box::into_raw(Box::new(OtfTestFunction(f))), "out") }
    })
}

/// # Safety
/// `f` must be a live handle and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_test_function_integral(f: *const OtfTestFunction, out: *mut f64) -> OtfStatus {
    guard(|| {
        let f = unsafe { handle(f, "function") }?;
        unsafe { put(out, f.0.integral(), "out") }
    })
}

/// # Safety
/// `f` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_test_function_free(f: *mut OtfTestFunction) {
    if !f.is_null() {
        drop(unsafe { Box::from_raw(f) });
    }
}

/// # Safety
/// `functions` must hold `count` live handles.
unsafe fn functions(functions: *const *const OtfTestFunction, count: usize) -> Result<Vec<TestFunction>, Failure> {
    let hs = unsafe { slice(functions, count, "functions") }?;
    hs.iter().map(|h| unsafe { handle(*h, "function") }.map(|f| f.0.clone())).collect()
}

/// Precompute the limit covariances of `system` for `count` test functions,
/// with default quadrature settings.
///
/// # Safety
/// `system` must be live, `functions` must hold `count` live handles and
/// `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_limit_model_new(
    system: *const OtfSystem,
    functions_ptr: *const *const OtfTestFunction,
    count: usize,
    out: *mut *mut OtfLimitModel,
) -> OtfStatus {
    guard(|| {
        let s = unsafe { handle(system, "system") }?;
        let fs = unsafe { functions(functions_ptr, count) }?;
        let m = LimitModel::new(&s.0, &fs, &QuadratureConfig::default())?;
        unsafe { put(out, Box::into_raw(Box::new(OtfLimitModel(m))), "out") }
    })
}

/// Limit of `Cov(⟨X_n(r), φ_i⟩, ⟨X_n(t), φ_j⟩)` with its quadrature error.
///
/// # Safety
/// `model` must be live and `value`, `err` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_limit_model_cov(
    model: *const OtfLimitModel,
    i: usize,
    j: usize,
    r: f64,
    t: f64,
    value: *mut f64,
    err: *mut f64,
) -> OtfStatus {
    guard(|| {
        let m = unsafe { handle(model, "model") }?;
        if value.is_null() || err.is_null() {
            return Err(Failure::Null("value/err"));
        }
        let e = m.0.cov(i, j, r, t)?;
        unsafe {
            value.write(e.value);
            err.write(e.error);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_limit_model_free(model: *mut OtfLimitModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Operator-scaling field of the large regime; needs `ᾱ > 2` and `gamma > 0`.
///
/// # Safety
/// `alphas` must hold `dim` values and `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_field_new(
    kind: OtfFieldKind,
    alphas: *const f64,
    dim: usize,
    theta: f64,
    gamma: f64,
    out: *mut *mut OtfField,
) -> OtfStatus {
    guard(|| {
        let a = unsafe { slice(alphas, dim, "alphas") }?;
        let which = match kind {
            OtfFieldKind::Y1 => Which::Y1,
            OtfFieldKind::Y2 => Which::Y2,
        };
        let spec = FieldSpec::new(which, StabilityVector::new(a.to_vec())?, theta, gamma)?;
        unsafe { put(out, Box::into_raw(Box::new(OtfField(spec))), "out") }
    })
}

/// `Cov(Y(u), Y(v))` for points `u, v ∈ [0, ∞)^d`.
///
/// # Safety
/// `field` must be live, `u` and `v` must hold the field's dimension in
/// values and `value`, `err` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_field_cov(
    field: *const OtfField,
    u: *const f64,
    v: *const f64,
    value: *mut f64,
    err: *mut f64,
) -> OtfStatus {
    guard(|| {
        let f = unsafe { handle(field, "field") }?;
        let d = f.0.sv.dim();
        let u = unsafe { slice(u, d, "u") }?;
        let v = unsafe { slice(v, d, "v") }?;
        if value.is_null() || err.is_null() {
            return Err(Failure::Null("value/err"));
        }
        let e = cov_field(&f.0, u, v, &QuadratureConfig::default())?;
        unsafe {
            value.write(e.value);
            err.write(e.error);
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn otf_field_free(field: *mut OtfField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Simulate replicate `replicate` of seed `seed` on the default periodic box
/// and write `⟨X_n(times[a]), φ_i⟩` to `out[a * count + i]`.
///
/// # Safety
/// `system` must be live, `functions` must hold `count` live handles,
/// `times` must hold `n_times` values and `out` must have room for
/// `n_times * count` values.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn otf_fluctuation_sample(
    system: *const OtfSystem,
    functions_ptr: *const *const OtfTestFunction,
    count: usize,
    times: *const f64,
    n_times: usize,
    seed: u64,
    replicate: u64,
    out: *mut f64,
) -> OtfStatus {
    guard(|| {
        let s = unsafe { handle(system, "system") }?;
        let fs = unsafe { functions(functions_ptr, count) }?;
        let ts = unsafe { slice(times, n_times, "times") }?;
        let dst = unsafe { slice_mut(out, n_times * count, "out") }?;
        let t_max = ts.iter().cloned().fold(0.0, f64::max);
        let bx = SimulationBox::enlarged(&s.0, &fs, t_max, 3.0, 2048, Boundary::Periodic)?;
        let req = SampleRequest {
            times: ts.to_vec(),
            functions: fs,
            weights: vec![],
            integration_grid: vec![],
            probes: vec![],
        };
        let sample = fluctuation_sample(&s.0, &bx, StreamKey::new(seed, replicate), &SimOptions::default(), &req)?;
        for (a, row) in sample.values.iter().enumerate() {
            dst[a * count..(a + 1) * count].copy_from_slice(row);
        }
        Ok(())
    })
}
