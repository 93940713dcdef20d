//! C ABI for the simulation core: opaque handles, status codes, and a
//! thread-local last-error message.
//!
//! Lifecycle: every `*_free` accepts NULL; every constructor returns
//! NULL on failure and leaves a diagnostic readable through
//! [`h2d_last_error`]. Handles are not thread-safe — confine each to
//! one thread or add external locking. All entry points catch panics
//! at the boundary and convert them to error returns.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_double, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use heli2dof::cli::parse_scenario_file;
use heli2dof::controllers::{partition_gain, PidGains};
use heli2dof::metrics::compute_stats;
use heli2dof::model::{build_linear_model, HeliParams, LinearModel};
use heli2dof::riccati::{synthesize_gains, CareSolution, LqrWeights};
use heli2dof::simulate::{run_closed_loop, Axis, ControllerKind, Scenario, Trace};

/// Result of an FFI call. Anything other than OK leaves a readable
/// diagnostic in the thread-local error slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H2dStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    SynthesisFailed = 3,
    ParseFailed = 4,
    SimulationFailed = 5,
    StatsFailed = 6,
    Panicked = 7,
}

/// Plant description handle: physical parameters plus the linearized
/// state-space model built from them.
pub struct H2dModel {
    params: HeliParams,
    model: LinearModel,
}

/// Synthesized feedback handle: the Riccati solution and its PID-style
/// partition, as consumed by both control laws.
pub struct H2dGains {
    solution: CareSolution,
    pid: PidGains,
}

/// Parsed scenario handle.
pub struct H2dScenario {
    inner: Scenario,
}

/// Completed run handle: one record per control tick.
pub struct H2dTrace {
    inner: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Runs an FFI body, converting panics into `default` plus an error
/// message instead of unwinding across the C boundary.
fn guard<T>(default: T, body: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(value) => value,
        Err(_) => {
            set_error("internal panic".to_string());
            default
        }
    }
}

/// Copies the last error message for this thread into `buf` as a
/// NUL-terminated string, truncating if `cap` is too small. Returns the
/// full length of the message including the terminator, or 0 when no
/// error is pending. Passing NULL or `cap == 0` only queries the length.
#[no_mangle]
pub unsafe extern "C" fn h2d_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always terminate, even when truncating
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Creates the nominal plant model. Returns NULL on failure.
#[no_mangle]
pub extern "C" fn h2d_model_default() -> *mut H2dModel {
    guard(ptr::null_mut(), || {
        clear_error();
        let params = HeliParams::default();
        match build_linear_model(&params) {
            Ok(model) => Box::into_raw(Box::new(H2dModel { params, model })),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Frees a model handle. NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn h2d_model_free(model: *mut H2dModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Synthesizes the state-feedback gain for `model` with the default
/// cost weights. Returns NULL on failure.
#[no_mangle]
pub unsafe extern "C" fn h2d_gains_synthesize(model: *const H2dModel) -> *mut H2dGains {
    guard(ptr::null_mut(), || {
        clear_error();
        let Some(model) = model.as_ref() else {
            set_error("model handle is NULL".to_string());
            return ptr::null_mut();
        };
        let _ = model.params; // the handle carries both; synthesis needs the linearization
        let solution = match synthesize_gains(&model.model, &LqrWeights::default()) {
            Ok(solution) => solution,
            Err(e) => {
                set_error(e.to_string());
                return ptr::null_mut();
            }
        };
        match partition_gain(&solution.k) {
            Ok(pid) => Box::into_raw(Box::new(H2dGains { solution, pid })),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Frobenius norm of the Riccati residual for a gains handle; NaN when
/// the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn h2d_gains_residual(gains: *const H2dGains) -> c_double {
    guard(f64::NAN, || match gains.as_ref() {
        Some(g) => g.solution.residual_norm,
        None => {
            set_error("gains handle is NULL".to_string());
            f64::NAN
        }
    })
}

/// Copies the 2×6 feedback gain `K` (u = −K·x) into `out` in row-major
/// order. `len` must be at least 12.
#[no_mangle]
pub unsafe extern "C" fn h2d_gains_feedback(
    gains: *const H2dGains,
    out: *mut c_double,
    len: usize,
) -> H2dStatus {
    guard(H2dStatus::Panicked, || {
        clear_error();
        let Some(g) = gains.as_ref() else {
            set_error("gains handle is NULL".to_string());
            return H2dStatus::NullArgument;
        };
        if out.is_null() {
            set_error("output buffer is NULL".to_string());
            return H2dStatus::NullArgument;
        }
        if len < 12 {
            set_error(format!("output buffer holds {len} doubles, need 12"));
            return H2dStatus::InvalidArgument;
        }
        for r in 0..2 {
            for c in 0..6 {
                *out.add(r * 6 + c) = g.solution.k[(r, c)];
            }
        }
        H2dStatus::Ok
    })
}

/// Frees a gains handle. NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn h2d_gains_free(gains: *mut H2dGains) {
    if !gains.is_null() {
        drop(Box::from_raw(gains));
    }
}

/// Loads and validates a scenario file (same format the CLI reads).
/// Returns NULL on failure.
#[no_mangle]
pub unsafe extern "C" fn h2d_scenario_load(path: *const c_char) -> *mut H2dScenario {
    guard(ptr::null_mut(), || {
        clear_error();
        if path.is_null() {
            set_error("path is NULL".to_string());
            return ptr::null_mut();
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8".to_string());
            return ptr::null_mut();
        };
        match parse_scenario_file(Path::new(path)) {
            Ok(inner) => Box::into_raw(Box::new(H2dScenario { inner })),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Frees a scenario handle. NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn h2d_scenario_free(scenario: *mut H2dScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs one closed-loop experiment. `controller` is 0 for the classic
/// law, 1 for the model-free law. Returns NULL on failure.
#[no_mangle]
pub unsafe extern "C" fn h2d_run(
    scenario: *const H2dScenario,
    gains: *const H2dGains,
    controller: c_int,
) -> *mut H2dTrace {
    guard(ptr::null_mut(), || {
        clear_error();
        let (Some(scenario), Some(gains)) = (scenario.as_ref(), gains.as_ref()) else {
            set_error("scenario or gains handle is NULL".to_string());
            return ptr::null_mut();
        };
        let kind = match controller {
            0 => ControllerKind::LqrPid,
            1 => ControllerKind::IlqrPid,
            other => {
                set_error(format!("controller must be 0 (lqr) or 1 (ilqr), got {other}"));
                return ptr::null_mut();
            }
        };
        match run_closed_loop(&scenario.inner, &gains.pid, kind) {
            Ok(inner) => Box::into_raw(Box::new(H2dTrace { inner })),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        }
    })
}

/// Number of records (control ticks) in a trace; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn h2d_trace_len(trace: *const H2dTrace) -> usize {
    guard(0, || match trace.as_ref() {
        Some(t) => t.inner.records.len(),
        None => 0,
    })
}

/// Tracking-error statistics over `[t0, t1]` for one axis (0 = pitch,
/// 1 = yaw), in degrees. Any output pointer may be NULL to skip that
/// value.
#[no_mangle]
pub unsafe extern "C" fn h2d_trace_stats(
    trace: *const H2dTrace,
    axis: c_int,
    t0: c_double,
    t1: c_double,
    out_mean_deg: *mut c_double,
    out_rms_deg: *mut c_double,
    out_std_deg: *mut c_double,
    out_max_abs_deg: *mut c_double,
) -> H2dStatus {
    guard(H2dStatus::Panicked, || {
        clear_error();
        let Some(trace) = trace.as_ref() else {
            set_error("trace handle is NULL".to_string());
            return H2dStatus::NullArgument;
        };
        let axis = match axis {
            0 => Axis::Pitch,
            1 => Axis::Yaw,
            other => {
                set_error(format!("axis must be 0 (pitch) or 1 (yaw), got {other}"));
                return H2dStatus::InvalidArgument;
            }
        };
        match compute_stats(&trace.inner, axis, t0, t1) {
            Ok(stats) => {
                if !out_mean_deg.is_null() {
                    *out_mean_deg = stats.mean_deg();
                }
                if !out_rms_deg.is_null() {
                    *out_rms_deg = stats.rms_deg();
                }
                if !out_std_deg.is_null() {
                    *out_std_deg = stats.std_deg();
                }
                if !out_max_abs_deg.is_null() {
                    *out_max_abs_deg = stats.max_abs_deg();
                }
                H2dStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                H2dStatus::StatsFailed
            }
        }
    })
}

/// Frees a trace handle. NULL is accepted.
#[no_mangle]
pub unsafe extern "C" fn h2d_trace_free(trace: *mut H2dTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
