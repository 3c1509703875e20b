//! C ABI for the mkropina analysis engine.
//!
//! Conventions: opaque handles behind pointers, integer status codes, and
//! strings allocated by this library that the caller releases with
//! [`mk_string_free`]. No call unwinds across the boundary. Reports produced
//! through this interface never carry timestamps, so identical inputs give
//! byte-identical output.
//!
//! The generated header lives at `include/mkropina.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mkropina::analysis::{analyze, run_geodesic, run_metrize, AnalyzeOptions};
use mkropina::config::GeometryConfig;
use mkropina::error::Error;
use mkropina::geodesics::{trajectory_to_csv, GeodesicState};
use mkropina::report::AnalysisReport;

/// Status of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStatus {
    MkOk = 0,
    /// Invalid configuration or expression input.
    MkConfigError = 1,
    /// A verdict precondition failed (e.g. metrizing a non-metrizable space).
    MkPreconditionError = 2,
    /// A numerical computation failed.
    MkNumericalError = 3,
    /// Null pointer or malformed argument at the boundary.
    MkInvalidArgument = 4,
}

/// Analysis verdict, mirroring the `verdict` report field.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkVerdict {
    MkMetrizable = 0,
    MkNotMetrizable = 1,
    MkNotBerwald = 2,
    /// The analysis could not reach a verdict (out-of-scope input).
    MkUndetermined = 3,
}

/// Opaque analysis result; release with [`mk_analysis_free`].
pub struct MkAnalysis {
    report: AnalysisReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> MkStatus {
    match err.exit_code() {
        1 => MkStatus::MkConfigError,
        2 => MkStatus::MkPreconditionError,
        _ => MkStatus::MkNumericalError,
    }
}

fn guard(body: impl FnOnce() -> MkStatus + std::panic::UnwindSafe) -> MkStatus {
    match catch_unwind(body) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            MkStatus::MkNumericalError
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, MkStatus> {
    if ptr.is_null() {
        set_last_error(&format!("{what} is a null pointer"));
        return Err(MkStatus::MkInvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("{what} is not valid UTF-8"));
        MkStatus::MkInvalidArgument
    })
}

fn string_out(s: String, out: *mut *mut c_char) -> MkStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(_) => {
            set_last_error("output contained an interior NUL byte");
            return MkStatus::MkNumericalError;
        }
    };
    unsafe { *out = c.into_raw() };
    MkStatus::MkOk
}

fn ffi_options() -> AnalyzeOptions {
    AnalyzeOptions {
        seed: None,
        grid_density: None,
        timestamp: false,
    }
}

/// Library version as a static string (do not free).
#[no_mangle]
pub extern "C" fn mk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last error raised on this thread. The pointer stays valid
/// until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn mk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Runs the analysis pipeline on a JSON geometry configuration.
///
/// # Safety
/// `config_json` must point to a NUL-terminated string and `out_analysis`
/// to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mk_analyze(
    config_json: *const c_char,
    out_analysis: *mut *mut MkAnalysis,
) -> MkStatus {
    guard(AssertUnwindSafe(|| {
        if out_analysis.is_null() {
            set_last_error("out_analysis is a null pointer");
            return MkStatus::MkInvalidArgument;
        }
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg = match GeometryConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => {
                set_last_error(&e.to_string());
                return status_of(&e);
            }
        };
        match analyze(&cfg, &ffi_options()) {
            Ok(report) => {
                *out_analysis = Box::into_raw(Box::new(MkAnalysis { report }));
                MkStatus::MkOk
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Serializes the analysis report as pretty JSON; free with
/// [`mk_string_free`].
///
/// # Safety
/// `analysis` must come from [`mk_analyze`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mk_analysis_report_json(
    analysis: *const MkAnalysis,
    out_json: *mut *mut c_char,
) -> MkStatus {
    guard(AssertUnwindSafe(|| {
        if analysis.is_null() || out_json.is_null() {
            set_last_error("null pointer argument");
            return MkStatus::MkInvalidArgument;
        }
        string_out((*analysis).report.to_json(), out_json)
    }))
}

/// The verdict of an analysis.
///
/// # Safety
/// `analysis` must come from [`mk_analyze`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mk_analysis_verdict(analysis: *const MkAnalysis) -> MkVerdict {
    if analysis.is_null() {
        return MkVerdict::MkUndetermined;
    }
    match (*analysis).report.verdict.as_deref() {
        Some("metrizable") => MkVerdict::MkMetrizable,
        Some("not-metrizable") => MkVerdict::MkNotMetrizable,
        Some("not-berwald") => MkVerdict::MkNotBerwald,
        _ => MkVerdict::MkUndetermined,
    }
}

/// Max skew of the affine Ricci tensor over the sample grid; NaN when the
/// analysis did not compute it.
///
/// # Safety
/// `analysis` must come from [`mk_analyze`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mk_analysis_ricci_skew_max(analysis: *const MkAnalysis) -> f64 {
    if analysis.is_null() {
        return f64::NAN;
    }
    (*analysis)
        .report
        .ricci_skew
        .as_ref()
        .map(|r| r.max)
        .unwrap_or(f64::NAN)
}

/// Residual of the Berwald certificate; NaN when unavailable.
///
/// # Safety
/// `analysis` must come from [`mk_analyze`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mk_analysis_berwald_residual(analysis: *const MkAnalysis) -> f64 {
    if analysis.is_null() {
        return f64::NAN;
    }
    (*analysis)
        .report
        .berwald
        .as_ref()
        .map(|b| b.residual)
        .unwrap_or(f64::NAN)
}

/// Builds and verifies the metrizing metric; the report JSON goes to
/// `out_json` (free with [`mk_string_free`]).
///
/// # Safety
/// Pointer arguments as in [`mk_analyze`].
#[no_mangle]
pub unsafe extern "C" fn mk_metrize(
    config_json: *const c_char,
    u0: f64,
    out_json: *mut *mut c_char,
) -> MkStatus {
    guard(AssertUnwindSafe(|| {
        if out_json.is_null() {
            set_last_error("out_json is a null pointer");
            return MkStatus::MkInvalidArgument;
        }
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = GeometryConfig::from_json(text)
            .and_then(|cfg| run_metrize(&cfg, &ffi_options(), Some(u0)));
        match result {
            Ok(report) => string_out(report.to_json(), out_json),
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Integrates a spray curve; `init` is "x1,..,xn;y1,..,yn". The trajectory
/// CSV (`t,x1..xn,y1..yn`) goes to `out_csv` (free with [`mk_string_free`]).
/// A non-positive `rel_tol` selects the default integrator tolerances.
///
/// # Safety
/// Pointer arguments as in [`mk_analyze`].
#[no_mangle]
pub unsafe extern "C" fn mk_geodesic_csv(
    config_json: *const c_char,
    init: *const c_char,
    t_end: f64,
    rel_tol: f64,
    out_csv: *mut *mut c_char,
) -> MkStatus {
    guard(AssertUnwindSafe(|| {
        if out_csv.is_null() {
            set_last_error("out_csv is a null pointer");
            return MkStatus::MkInvalidArgument;
        }
        let text = match read_str(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let init = match read_str(init, "init") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = (|| -> Result<String, Error> {
            let cfg = GeometryConfig::from_json(text)?;
            let state = parse_init(init)?;
            let run = run_geodesic(
                &cfg,
                &ffi_options(),
                state,
                t_end,
                (rel_tol > 0.0).then_some(rel_tol),
                false,
            )?;
            Ok(trajectory_to_csv(&run.trajectory))
        })();
        match result {
            Ok(csv) => string_out(csv, out_csv),
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

fn parse_init(spec: &str) -> Result<GeodesicState, Error> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 2 {
        return Err(Error::Config(
            "init expects \"x1,..,xn;y1,..,yn\" (one semicolon)".into(),
        ));
    }
    let parse_list = |s: &str| -> Result<Vec<f64>, Error> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid number `{v}` in init")))
            })
            .collect()
    };
    GeodesicState::new(0.0, parse_list(parts[0])?, parse_list(parts[1])?)
}

/// Releases an analysis handle.
///
/// # Safety
/// `analysis` must come from [`mk_analyze`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_analysis_free(analysis: *mut MkAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Releases a string allocated by this library.
///
/// # Safety
/// `s` must come from an `out_*` parameter of this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
