//! C ABI for `ndstab`.
//!
//! Every fallible function returns an [`NdstabStatus`]; on failure the
//! message is available from [`ndstab_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned by the library are released with
//! [`ndstab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndstab::criteria::{self, AlphaChoice};
use ndstab::eqspec::{validate, EquationSpec, SpecError};
use ndstab::params::{summarize, ParameterSummary};
use ndstab::report::{self, ReportError};
use ndstab::simulate::{self, History, Trajectory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdstabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    DomainError = 5,
    SimulationError = 6,
    Panic = 7,
}

/// Parsed equation.
pub struct NdstabSpec {
    inner: EquationSpec,
}

/// Integrated trajectory on a uniform grid.
pub struct NdstabTrajectory {
    inner: Trajectory,
}

/// Scalar bounds of an equation. `inf_a > 0` is required by the
/// positive-coefficient test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdstabSummary {
    pub norm_a: f64,
    pub inf_a: f64,
    pub norm_a_plus: f64,
    pub norm_a_minus: f64,
    pub norm_b: f64,
    pub inf_b: f64,
    pub sigma: f64,
    pub tau: f64,
    pub delta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdstabInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
    pub empty: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdstabHistoryKind {
    /// `phi = value`
    Constant = 0,
    /// `phi = sin t`
    Sine = 1,
    /// Reproducible random piecewise-linear history from `seed`.
    Seeded = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdstabHistory {
    pub kind: NdstabHistoryKind,
    pub value: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NdstabStatus, String);

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure(NdstabStatus::ParseError, e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure(NdstabStatus::DomainError, e.to_string())
    }
}

impl From<simulate::SimError> for Failure {
    fn from(e: simulate::SimError) -> Self {
        Failure(NdstabStatus::SimulationError, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NdstabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NdstabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NdstabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(NdstabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn to_summary(s: &NdstabSummary) -> ParameterSummary {
    let mut out = ParameterSummary::with_positive_a(s.norm_a, s.inf_a, s.norm_b, s.sigma, s.tau, s.delta);
    out.norm_a_plus = s.norm_a_plus;
    out.norm_a_minus = s.norm_a_minus;
    out.inf_b = s.inf_b;
    out
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ndstab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses an equation from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be null or a valid NUL-terminated string; `out` must be null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_spec_from_json(json: *const c_char, out: *mut *mut NdstabSpec) -> NdstabStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(NdstabStatus::InvalidUtf8, e.to_string()))?;
        let inner = EquationSpec::from_json_str(text)?;
        *out = Box::into_raw(Box::new(NdstabSpec { inner }));
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from [`ndstab_spec_from_json`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn ndstab_spec_free(spec: *mut NdstabSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Checks the standing assumptions on `grid_points` samples. Returns
/// `ValidationError` with the failed checks in the error message.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_spec_validate(spec: *const NdstabSpec, grid_points: usize) -> NdstabStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let report = validate(&spec.inner, grid_points);
        if report.passed() {
            return Ok(());
        }
        let failures: Vec<String> = report.failures().map(|c| format!("{:?}: {}", c.assumption, c.detail)).collect();
        Err(Failure(NdstabStatus::ValidationError, failures.join("; ")))
    })
}

/// Bounds of `spec` from its overrides or from `grid_points` samples.
///
/// # Safety
/// `spec` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_spec_summary(
    spec: *const NdstabSpec,
    grid_points: usize,
    out: *mut NdstabSummary,
) -> NdstabStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = summarize(&spec.inner, grid_points).map_err(|e| Failure(NdstabStatus::DomainError, e.to_string()))?;
        *out = NdstabSummary {
            norm_a: s.norm_a,
            inf_a: s.inf_a,
            norm_a_plus: s.norm_a_plus,
            norm_a_minus: s.norm_a_minus,
            norm_b: s.norm_b,
            inf_b: s.inf_b,
            sigma: s.sigma,
            tau: s.tau,
            delta: s.delta,
        };
        Ok(())
    })
}

/// Every criterion verdict as a JSON document. `alpha` is NaN for the
/// automatic choice, otherwise a value in `[0, 1]`. Free the string with
/// [`ndstab_string_free`].
///
/// # Safety
/// `spec` must be null or a live handle; `out_json` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_check_json(
    spec: *const NdstabSpec,
    alpha: f64,
    grid_points: usize,
    out_json: *mut *mut c_char,
) -> NdstabStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let choice = if alpha.is_nan() {
            AlphaChoice::Auto
        } else if (0.0..=1.0).contains(&alpha) {
            AlphaChoice::Fixed(alpha)
        } else {
            return Err(Failure(NdstabStatus::DomainError, format!("alpha = {alpha} is outside [0, 1]")));
        };
        let analysis = report::analyze(&spec.inner, choice, grid_points)?;
        let text = serde_json::to_string(&analysis).map_err(|e| Failure(NdstabStatus::DomainError, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Failure(NdstabStatus::DomainError, e.to_string()))?;
        *out_json = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ndstab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `(1 - |a|) / (e |b|)`; NaN when `summary` is null.
///
/// # Safety
/// `summary` must be null or readable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_tau0(summary: *const NdstabSummary) -> f64 {
    match summary.as_ref() {
        Some(s) => criteria::tau0(&to_summary(s)),
        None => f64::NAN,
    }
}

/// The `alpha` values in `[0, 1]` for which the positive-coefficient test
/// holds.
///
/// # Safety
/// `summary` must be null or readable; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_alpha_interval_theorem1(
    summary: *const NdstabSummary,
    out: *mut NdstabInterval,
) -> NdstabStatus {
    guard(|| {
        let s = deref(summary, "summary")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let i = criteria::alpha_interval_theorem1(&to_summary(s));
        *out = NdstabInterval {
            lower: i.lower,
            upper: i.upper,
            lower_open: i.lower_open,
            upper_open: i.upper_open,
            empty: i.empty,
        };
        Ok(())
    })
}

/// Integrates `spec` from `t0` to `t_end` with step `step`.
///
/// # Safety
/// `spec` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ndstab_simulate(
    spec: *const NdstabSpec,
    history: NdstabHistory,
    t_end: f64,
    step: f64,
    out: *mut *mut NdstabTrajectory,
) -> NdstabStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = match history.kind {
            NdstabHistoryKind::Constant => History::Constant(history.value),
            NdstabHistoryKind::Sine => History::Sine,
            NdstabHistoryKind::Seeded => History::seeded(history.seed, spec.inner.t0),
        };
        let inner = simulate::integrate(&spec.inner, &h, t_end, step)?;
        *out = Box::into_raw(Box::new(NdstabTrajectory { inner }));
        Ok(())
    })
}

/// Number of grid points; 0 for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_len(traj: *const NdstabTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Time of the first point; NaN for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_t0(traj: *const NdstabTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.inner.t0)
}

/// Grid spacing; NaN for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_step(traj: *const NdstabTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.inner.step)
}

/// `x` at the grid points, `ndstab_trajectory_len` values owned by the
/// handle; null for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_x(traj: *const NdstabTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.inner.x.as_ptr())
}

/// `y = x - a x(g)` at the grid points.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_y(traj: *const NdstabTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.inner.y.as_ptr())
}

/// # Safety
/// `traj` must be null or a handle from [`ndstab_simulate`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn ndstab_trajectory_free(traj: *mut NdstabTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
