//! C ABI for framelab.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`FlStatus`]; on failure a message is available from
//! [`fl_last_error_message`] on the same thread. Matrices are passed as
//! row-major `double` arrays and `INFINITY` stands for the `l^inf` exponent.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use framelab::cli::{self, CliError, JobSpec, OracleMode, RunOptions};
use framelab::operators::{self, FrameSystem};
use framelab::perturbation::{self, PerturbationConstants, TheoremReport, Verdict, VerifyOptions};
use framelab::{FrameError, SpaceSpec};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidJob = 4,
    Numerical = 5,
    Panic = 6,
}

/// Outcome of a perturbation check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlVerdict {
    Verified = 0,
    HypothesisFails = 1,
    BoundViolated = 2,
    Inconclusive = 3,
}

impl From<Verdict> for FlVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Verified => FlVerdict::Verified,
            Verdict::HypothesisFails => FlVerdict::HypothesisFails,
            Verdict::BoundViolated => FlVerdict::BoundViolated,
            Verdict::Inconclusive => FlVerdict::Inconclusive,
        }
    }
}

/// A finite sequence in `l^p(n)` together with its coefficient space `l^q(m)`.
pub struct FlSystem {
    inner: FrameSystem,
}

/// The outcome of a frame perturbation check.
pub struct FlReport {
    inner: TheoremReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FlStatus, String);

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        let status = match e {
            FrameError::DimensionMismatch { .. } | FrameError::NotSquare { .. } => FlStatus::DimensionMismatch,
            ref e if e.is_numerical() => FlStatus::Numerical,
            _ => FlStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Input(_) => FlStatus::InvalidJob,
            _ => FlStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("panic: {msg}"));
            FlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn matrix(data: *const c_double, rows: usize, cols: usize) -> Result<DMatrix<f64>, Failure> {
    if data.is_null() {
        return Err(null("data"));
    }
    if rows == 0 || cols == 0 {
        return Err(Failure(FlStatus::InvalidArgument, "matrix must be non-empty".into()));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure(FlStatus::InvalidArgument, "matrix size overflows".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, std::slice::from_raw_parts(data, len)))
}

fn space(dim: usize, p: f64) -> Result<SpaceSpec, Failure> {
    Ok(SpaceSpec::new(dim, framelab::Exponent::new(p)?)?)
}

fn constants(mu: f64, lambda1: f64, lambda2: f64) -> Result<PerturbationConstants, Failure> {
    Ok(PerturbationConstants::new(mu, lambda1, lambda2)?)
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a system from `rows` vectors of length `cols` (row-major), living
/// in `l^p(cols)` with coefficients in `l^q(rows)`.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_system_new(
    data: *const c_double,
    rows: usize,
    cols: usize,
    p: c_double,
    q: c_double,
    out: *mut *mut FlSystem,
) -> FlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = FrameSystem::new(matrix(data, rows, cols)?, space(cols, p)?, space(rows, q)?)?;
        write(out, Box::into_raw(Box::new(FlSystem { inner })), "out")
    })
}

/// Releases a system. NULL is ignored.
///
/// # Safety
/// `system` must come from [`fl_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_system_free(system: *mut FlSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of vectors and their dimension.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_system_shape(system: *const FlSystem, rows: *mut usize, cols: *mut usize) -> FlStatus {
    guard(|| {
        let s = &deref(system, "system")?.inner;
        write(rows, s.len(), "rows")?;
        write(cols, s.dim(), "cols")
    })
}

/// Operator norm of the `rows x cols` matrix from `l^p(cols)` to `l^q(rows)`.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_op_norm(
    data: *const c_double,
    rows: usize,
    cols: usize,
    p: c_double,
    q: c_double,
    out: *mut c_double,
) -> FlStatus {
    guard(|| {
        let m = matrix(data, rows, cols)?;
        let est = operators::op_norm(&m, &space(cols, p)?, &space(rows, q)?)?;
        write(out, est.value, "out")
    })
}

/// Optimal lower and upper frame bounds of a system.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_frame_bounds(system: *const FlSystem, lower: *mut c_double, upper: *mut c_double) -> FlStatus {
    guard(|| {
        let (a, b) = operators::frame_bounds(&deref(system, "system")?.inner)?;
        write(lower, a.value, "lower")?;
        write(upper, b.value, "upper")
    })
}

/// Smallest `mu` for which the perturbation of `g` by `phi` satisfies the
/// residual condition with the given `lambda1`, `lambda2`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_minimal_mu(
    g: *const FlSystem,
    phi: *const FlSystem,
    lambda1: c_double,
    lambda2: c_double,
    out: *mut c_double,
) -> FlStatus {
    guard(|| {
        let (g, phi) = (&deref(g, "g")?.inner, &deref(phi, "phi")?.inner);
        constants(0.0, lambda1, lambda2)?;
        write(out, perturbation::minimal_mu(g, phi, lambda1, lambda2)?, "out")
    })
}

/// Checks the frame perturbation theorem for `phi` against `g`. A failing
/// hypothesis is reported through the verdict, not the status.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_verify_frame(
    g: *const FlSystem,
    phi: *const FlSystem,
    mu: c_double,
    lambda1: c_double,
    lambda2: c_double,
    out: *mut *mut FlReport,
) -> FlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (g, phi) = (&deref(g, "g")?.inner, &deref(phi, "phi")?.inner);
        let k = constants(mu, lambda1, lambda2)?;
        let inner = perturbation::verify_frame_perturbation(g, phi, &k, &VerifyOptions::default())?;
        write(out, Box::into_raw(Box::new(FlReport { inner })), "out")
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_report_free(report: *mut FlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Verdict of a report.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_report_verdict(report: *const FlReport, out: *mut FlVerdict) -> FlStatus {
    guard(|| write(out, deref(report, "report")?.inner.verdict.into(), "out"))
}

/// Predicted bounds and the perturbation size `delta`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_report_bounds(
    report: *const FlReport,
    lower: *mut c_double,
    upper: *mut c_double,
    delta: *mut c_double,
) -> FlStatus {
    guard(|| {
        let r = &deref(report, "report")?.inner;
        write(lower, r.predicted_lower, "lower")?;
        write(upper, r.predicted_upper, "upper")?;
        write(delta, r.delta, "delta")
    })
}

/// The report as JSON. Release the string with [`fl_string_free`].
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_report_json(report: *const FlReport, out: *mut *mut c_char) -> FlStatus {
    guard(|| {
        let r = &deref(report, "report")?.inner;
        let json = serde_json::to_string_pretty(r).map_err(|e| Failure(FlStatus::Numerical, e.to_string()))?;
        write(out, into_c_string(json), "out")
    })
}

/// Runs a job given as JSON text and returns the report document as JSON.
/// Oracles are off and the timestamp is fixed at zero, so the output is a
/// function of the job alone. Release the string with [`fl_string_free`].
///
/// # Safety
/// `job_json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_run_job_json(job_json: *const c_char, out: *mut *mut c_char) -> FlStatus {
    guard(|| {
        if job_json.is_null() {
            return Err(null("job_json"));
        }
        let text = CStr::from_ptr(job_json)
            .to_str()
            .map_err(|_| Failure(FlStatus::InvalidJob, "job is not valid UTF-8".into()))?;
        let spec = JobSpec::from_json(text).map_err(|e| Failure(FlStatus::InvalidJob, e.to_string()))?;
        let opts = RunOptions { oracle: OracleMode::Off, timestamp: Some(0), ..RunOptions::default() };
        let job = cli::prepare_job(&spec, &opts)?;
        let doc = cli::execute(&job, &opts)?;
        write(out, into_c_string(doc.to_json()), "out")
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
