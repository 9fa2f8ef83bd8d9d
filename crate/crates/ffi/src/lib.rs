//! C ABI over `voi-core`.
//!
//! Objects are opaque handles created by `*_from_json` / `*_solve` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`VoiStatus`]; on failure [`voi_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use voi_core::aoi::Age;
use voi_core::lqr::{solve_riccati, LqrSchedule};
use voi_core::model::{ModelSpec, SystemModel};
use voi_core::sim::evaluate;
use voi_core::solver::{
    solve_path_dp, solve_restricted_dp, PathSolverConfig, PathValueTable, PolicySpec, RestrictedValueTable,
};
use voi_core::VoiError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidModel = 3,
    InvalidArgument = 4,
    Unsupported = 5,
    Numerical = 6,
    TooLarge = 7,
    Io = 8,
    /// The threshold does not exist at this state.
    NotFound = 9,
    Panic = 10,
}

pub struct VoiModel {
    inner: SystemModel,
}

pub struct VoiSchedule {
    inner: LqrSchedule,
}

pub struct VoiRestrictedTable {
    inner: Arc<RestrictedValueTable>,
}

pub struct VoiPathTable {
    inner: Arc<PathValueTable>,
}

/// Monte Carlo summary: means with 95% half-widths.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VoiLossSummary {
    pub psi_mean: f64,
    pub psi_ci95: f64,
    pub rate_mean: f64,
    pub rate_ci95: f64,
    pub regulation_mean: f64,
    pub regulation_ci95: f64,
    /// NaN when the model fixes `theta` only.
    pub phi_mean: f64,
    pub phi_ci95: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(VoiStatus, String);

impl From<VoiError> for Failure {
    fn from(e: VoiError) -> Self {
        let status = match &e {
            VoiError::InvalidModel(_)
            | VoiError::NotPositiveDefinite(_)
            | VoiError::Dimension { .. }
            | VoiError::Json(_) => VoiStatus::InvalidModel,
            VoiError::Unsupported(_) => VoiStatus::Unsupported,
            VoiError::Numerical(_) => VoiStatus::Numerical,
            VoiError::TooLarge(_) => VoiStatus::TooLarge,
            VoiError::Io(_) | VoiError::Csv(_) | VoiError::Cache(_) => VoiStatus::Io,
            _ => VoiStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VoiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VoiStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            VoiStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(VoiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VoiStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn age(eta: i64) -> Result<Age, Failure> {
    match eta {
        -1 => Ok(Age::Infinite),
        e if e >= 0 => Ok(Age::Finite(e as usize)),
        e => Err(Failure(
            VoiStatus::InvalidArgument,
            format!("eta = {e}; use -1 for infinity"),
        )),
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn voi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a model from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn voi_model_from_json(json: *const c_char, out: *mut *mut VoiModel) -> VoiStatus {
    guard(|| {
        let spec = ModelSpec::from_json_str(text(json, "json")?)?;
        put(
            out,
            VoiModel {
                inner: spec.validate()?,
            },
        )
    })
}

/// # Safety
/// `model` must be a live handle; `horizon` and `state_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_model_dims(
    model: *const VoiModel,
    horizon: *mut usize,
    state_dim: *mut usize,
) -> VoiStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        if horizon.is_null() || state_dim.is_null() {
            return Err(null("output"));
        }
        *horizon = m.horizon();
        *state_dim = m.state_dim();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `voi_model_from_json`, freed once.
#[no_mangle]
pub unsafe extern "C" fn voi_model_free(model: *mut VoiModel) {
    release(model)
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_lqr_solve(model: *const VoiModel, out: *mut *mut VoiSchedule) -> VoiStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        put(
            out,
            VoiSchedule {
                inner: solve_riccati(m)?,
            },
        )
    })
}

/// Copies the gain `L_k` in row-major order into `buf`, which must hold
/// `len >= inputs * states` values.
///
/// # Safety
/// `schedule` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn voi_schedule_gain(
    schedule: *const VoiSchedule,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> VoiStatus {
    guard(|| {
        let s = &borrow(schedule, "schedule")?.inner;
        if k > s.horizon() {
            return Err(Failure(
                VoiStatus::InvalidArgument,
                format!("k = {k} beyond horizon {}", s.horizon()),
            ));
        }
        let g = s.gain(k);
        let need = g.nrows() * g.ncols();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < need {
            return Err(Failure(
                VoiStatus::InvalidArgument,
                format!("buffer holds {len}, need {need}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                out[i * g.ncols() + j] = g[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `schedule` must be null or a handle from `voi_lqr_solve`, freed once.
#[no_mangle]
pub unsafe extern "C" fn voi_schedule_free(schedule: *mut VoiSchedule) {
    release(schedule)
}

/// Solves the age-only value table.
///
/// # Safety
/// `model` and `schedule` must be live handles for the same model; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_restricted_solve(
    model: *const VoiModel,
    schedule: *const VoiSchedule,
    out: *mut *mut VoiRestrictedTable,
) -> VoiStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        let s = &borrow(schedule, "schedule")?.inner;
        let table = solve_restricted_dp(m, s)?;
        put(out, VoiRestrictedTable { inner: Arc::new(table) })
    })
}

/// `VoI_k(zeta, eta)`; pass `eta = -1` for an infinite controller age.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_restricted_voi(
    table: *const VoiRestrictedTable,
    k: usize,
    zeta: usize,
    eta: i64,
    out: *mut f64,
) -> VoiStatus {
    guard(|| {
        let t = &borrow(table, "table")?.inner;
        let v = t.voi(k, zeta, age(eta)?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = v;
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from `voi_restricted_solve`, freed once.
#[no_mangle]
pub unsafe extern "C" fn voi_restricted_free(table: *mut VoiRestrictedTable) {
    release(table)
}

/// Solves the mismatch value table of a scalar model. Zero or negative
/// settings select the defaults.
///
/// # Safety
/// `model` and `schedule` must be live handles for the same model; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_path_solve(
    model: *const VoiModel,
    schedule: *const VoiSchedule,
    e_max: f64,
    points_per_side: usize,
    quadrature_order: usize,
    out: *mut *mut VoiPathTable,
) -> VoiStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        let s = &borrow(schedule, "schedule")?.inner;
        let mut cfg = PathSolverConfig::default();
        if e_max > 0.0 {
            cfg.e_max = Some(e_max);
        }
        if points_per_side > 0 {
            cfg.points_per_side = points_per_side;
        }
        if quadrature_order > 0 {
            cfg.quadrature_order = quadrature_order;
        }
        let table = solve_path_dp(m, s, &cfg)?;
        put(out, VoiPathTable { inner: Arc::new(table) })
    })
}

/// `VoI_k(zeta, e)`. `clamped` (may be null) reports `|e|` beyond the grid.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_path_voi(
    table: *const VoiPathTable,
    k: usize,
    zeta: usize,
    e: f64,
    out: *mut f64,
    clamped: *mut bool,
) -> VoiStatus {
    guard(|| {
        let t = &borrow(table, "table")?.inner;
        let (v, c) = t.voi_at(k, zeta, e)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = v;
        if !clamped.is_null() {
            *clamped = c;
        }
        Ok(())
    })
}

/// Smallest `|e|` at which the policy transmits at `(k, zeta)`; returns
/// `NotFound` when it never transmits on the grid.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_path_threshold(
    table: *const VoiPathTable,
    k: usize,
    zeta: usize,
    out: *mut f64,
) -> VoiStatus {
    guard(|| {
        let t = &borrow(table, "table")?.inner;
        let th = t.threshold(k, zeta)?;
        if out.is_null() {
            return Err(null("out"));
        }
        match th.value {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => Err(Failure(
                VoiStatus::NotFound,
                format!("no threshold at k = {k}, zeta = {zeta}"),
            )),
        }
    })
}

/// # Safety
/// `table` must be null or a handle from `voi_path_solve`, freed once.
#[no_mangle]
pub unsafe extern "C" fn voi_path_free(table: *mut VoiPathTable) {
    release(table)
}

/// Monte Carlo evaluation of a policy named as on the command line
/// (`path-voi`, `restricted-voi`, `periodic:N`, ...). VoI policies take their
/// table from `path` or `restricted`; the other may be null.
///
/// # Safety
/// Non-null handles must be live and solved for `model`; `policy` must be a
/// NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_evaluate(
    model: *const VoiModel,
    schedule: *const VoiSchedule,
    policy: *const c_char,
    path: *const VoiPathTable,
    restricted: *const VoiRestrictedTable,
    n_runs: usize,
    seed: u64,
    out: *mut VoiLossSummary,
) -> VoiStatus {
    guard(|| {
        let m = &borrow(model, "model")?.inner;
        let s = &borrow(schedule, "schedule")?.inner;
        let spec: PolicySpec = text(policy, "policy")?.parse()?;
        let path = path.as_ref().map(|p| &p.inner);
        let restricted = restricted.as_ref().map(|r| &r.inner);
        let policy = spec.resolve(path, restricted)?;
        let ev = evaluate(m, s, &policy, n_runs, seed)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = &ev.report;
        *out = VoiLossSummary {
            psi_mean: r.psi.mean,
            psi_ci95: r.psi.ci95,
            rate_mean: r.rate.mean,
            rate_ci95: r.rate.ci95,
            regulation_mean: r.regulation.mean,
            regulation_ci95: r.regulation.ci95,
            phi_mean: r.phi.map_or(f64::NAN, |p| p.mean),
            phi_ci95: r.phi.map_or(f64::NAN, |p| p.ci95),
        };
        Ok(())
    })
}
