//! C interface to `mtslab`.
//!
//! Every fallible call returns an [`MtsStatus`]. On failure the message is
//! kept per thread and read with [`mts_last_error_message`]. Objects are
//! opaque handles released by their `_free` function; strings handed out are
//! released with [`mts_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtslab::harness::{self, ExperimentSpec, RatioReport};
use mtslab::metric::{self, MetricSpace};
use mtslab::offline::{optimal_rle, Start};
use mtslab::{Error, Instance};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidParameter = 4,
    InvalidMetric = 5,
    InvalidState = 6,
    InvalidTrace = 7,
    NotSetChasing = 8,
    UnsupportedMetric = 9,
    SequenceTooLong = 10,
    TooLarge = 11,
    Unknown = 12,
    Io = 13,
    NoPivot = 14,
    Panic = 15,
}

impl From<&Error> for MtsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidTrace(_) => MtsStatus::InvalidTrace,
            Error::SequenceTooLong { .. } => MtsStatus::SequenceTooLong,
            Error::InvalidState { .. } => MtsStatus::InvalidState,
            Error::InvalidMetric(_) => MtsStatus::InvalidMetric,
            Error::NotSetChasing(_) => MtsStatus::NotSetChasing,
            Error::NoPivot(_) => MtsStatus::NoPivot,
            Error::UnsupportedMetric(_) => MtsStatus::UnsupportedMetric,
            Error::InvalidParameter(_) => MtsStatus::InvalidParameter,
            Error::TooLarge(_) => MtsStatus::TooLarge,
            Error::Parse(_) => MtsStatus::Parse,
            Error::Unknown(_) => MtsStatus::Unknown,
            Error::Io(_) => MtsStatus::Io,
        }
    }
}

/// A validated problem instance.
pub struct MtsInstance(Instance);

/// The result of a simulation.
pub struct MtsReport(RatioReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(MtsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(MtsStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MtsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MtsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(MtsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(MtsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_ptr<T>(p: *mut *mut T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail(MtsStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks a metric given as JSON. Returns `InvalidMetric` with the violated
/// axiom as the error message when it is not a valid metric.
///
/// # Safety
/// `json` must be a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mts_validate_metric(json: *const c_char) -> MtsStatus {
    guard(|| {
        let space = MetricSpace::from_json(text(json, "json")?)?;
        metric::validate(&space).map_err(|v| Fail(MtsStatus::InvalidMetric, v.to_string()))
    })
}

/// Parses and validates an instance.
///
/// # Safety
/// `json` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mts_instance_from_json(json: *const c_char, out: *mut *mut MtsInstance) -> MtsStatus {
    guard(|| {
        out_ptr(out)?;
        let inst = Instance::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(MtsInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from [`mts_instance_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mts_instance_free(inst: *mut MtsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of points of the instance's metric, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_instance_points(inst: *const MtsInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.metric.n())
}

/// Exact offline optimum from the instance's start state, written as a
/// string: `p/q`, an integer, or `inf`.
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mts_instance_optimal(inst: *const MtsInstance, out: *mut *mut c_char) -> MtsStatus {
    guard(|| {
        out_ptr(out)?;
        let inst = inst.as_ref().ok_or_else(|| Fail(MtsStatus::NullPointer, "instance is null".into()))?;
        let i = &inst.0;
        let opt = optimal_rle(&i.metric, &i.requests, Start::At(i.initial_state), &i.sequence)?;
        *out = c_string(opt.cost.to_string());
        Ok(())
    })
}

/// Serves the instance's sequence with a named algorithm.
///
/// # Safety
/// `inst` must be a live handle, `algorithm` a valid string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mts_run_fixed(
    inst: *const MtsInstance,
    algorithm: *const c_char,
    seed: u64,
    cap: u64,
    out: *mut *mut MtsReport,
) -> MtsStatus {
    guard(|| {
        out_ptr(out)?;
        let inst = inst.as_ref().ok_or_else(|| Fail(MtsStatus::NullPointer, "instance is null".into()))?;
        let report = harness::run_fixed(&inst.0, text(algorithm, "algorithm")?, seed, cap)?;
        *out = Box::into_raw(Box::new(MtsReport(report)));
        Ok(())
    })
}

/// Runs an experiment described as JSON, for example
/// `{"adversary":"paired-uniform","algorithm":"lazy","n":8,"C":"8","phases":5}`.
///
/// # Safety
/// `spec_json` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mts_simulate(spec_json: *const c_char, out: *mut *mut MtsReport) -> MtsStatus {
    guard(|| {
        out_ptr(out)?;
        let spec: ExperimentSpec =
            serde_json::from_str(text(spec_json, "spec")?).map_err(|e| Fail(MtsStatus::Parse, e.to_string()))?;
        let report = harness::run(&spec)?;
        *out = Box::into_raw(Box::new(MtsReport(report)));
        Ok(())
    })
}

/// The full report as JSON.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mts_report_json(report: *const MtsReport, out: *mut *mut c_char) -> MtsStatus {
    guard(|| {
        out_ptr(out)?;
        let r = report.as_ref().ok_or_else(|| Fail(MtsStatus::NullPointer, "report is null".into()))?;
        *out = c_string(r.0.to_json());
        Ok(())
    })
}

/// 1 if every check row passed, 0 if some failed, -1 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_report_passed(report: *const MtsReport) -> i32 {
    report.as_ref().map_or(-1, |r| i32::from(r.0.passed))
}

/// Completed phases summed over trials, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_report_completed_phases(report: *const MtsReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.completed_phases)
}

/// # Safety
/// `report` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mts_report_free(report: *mut MtsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
