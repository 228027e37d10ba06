//! C ABI over `spark-core`.
//!
//! Every fallible function returns a [`SparkStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`spark_last_error`] on the same thread until the next failing call.
//!
//! Handles ([`SparkConfig`], [`SparkTrace`], [`SparkReport`]) are opaque and
//! owned by the caller once returned; release them with the matching
//! `*_free` function. Strings returned by the library are released with
//! [`spark_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spark_core::scaling::reactive_desired;
use spark_core::telemetry::LegitimacySignal;
use spark_core::{engine, report, Error, MetricsReport, RunTrace, SimConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    Parse = 5,
    Runtime = 6,
    Panic = 7,
}

/// Simulation config.
pub struct SparkConfig(SimConfig);

/// Result of one run.
pub struct SparkTrace(RunTrace);

/// Metrics computed from a trace.
pub struct SparkReport(MetricsReport);

/// Headline numbers of a report. Optional values are NaN when not applicable.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SparkSummary {
    pub avg_pods: f64,
    pub peak_pods: u32,
    pub peak_desired: u32,
    /// Percent of admitted requests.
    pub timeout_rate: f64,
    /// Seconds.
    pub scale_lag: f64,
    /// Seconds.
    pub time_to_stabilize: f64,
    pub ingress_drop_fraction: f64,
    pub admitted: u64,
    pub timed_out: u64,
    pub error_count: u64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> SparkStatus {
    match err {
        Error::InvalidConfig { .. } => SparkStatus::InvalidConfig,
        Error::InvalidArgument(_) => SparkStatus::InvalidArgument,
        Error::Parse(_) => SparkStatus::Parse,
        _ => SparkStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SparkStatus>) -> SparkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SparkStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            SparkStatus::Panic
        }
    }
}

fn check<T>(r: spark_core::Result<T>) -> Result<T, SparkStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SparkStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        return Err(SparkStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        SparkStatus::InvalidUtf8
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, SparkStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("`{name}` is null"));
        SparkStatus::NullPointer
    })
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), SparkStatus> {
    if out.is_null() {
        set_error(format!("`{name}` is null"));
        return Err(SparkStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn spark_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spark_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in scenario config, e.g. `("flash-crowd", "predictive")`.
///
/// # Safety
/// `name` and `variant` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_config_scenario(
    name: *const c_char,
    variant: *const c_char,
    out: *mut *mut SparkConfig,
) -> SparkStatus {
    guard(|| {
        let cfg = check(engine::scenario(str_arg(name, "name")?, str_arg(variant, "variant")?))?;
        write_out(out, boxed(SparkConfig(cfg)), "out")
    })
}

/// Parses and validates a TOML config document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_config_from_toml(text: *const c_char, out: *mut *mut SparkConfig) -> SparkStatus {
    guard(|| {
        let cfg = check(SimConfig::from_toml_str(str_arg(text, "text")?))?;
        write_out(out, boxed(SparkConfig(cfg)), "out")
    })
}

/// # Safety
/// `config` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn spark_config_set_seed(config: *mut SparkConfig, seed: u64) -> SparkStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| {
            set_error("`config` is null");
            SparkStatus::NullPointer
        })?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Replica count the reactive rule gives for `rps` under this config.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_config_reactive_desired(
    config: *const SparkConfig,
    rps: f64,
    out: *mut u32,
) -> SparkStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        if !(rps >= 0.0 && rps.is_finite()) {
            set_error("`rps` must be finite and >= 0");
            return Err(SparkStatus::InvalidArgument);
        }
        write_out(out, reactive_desired(rps, &cfg.0.scaler), "out")
    })
}

/// # Safety
/// `config` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn spark_config_free(config: *mut SparkConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the simulation.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_run(config: *const SparkConfig, out: *mut *mut SparkTrace) -> SparkStatus {
    guard(|| {
        let cfg = ref_arg(config, "config")?;
        let trace = check(engine::run(&cfg.0))?;
        write_out(out, boxed(SparkTrace(trace)), "out")
    })
}

/// Number of ticks in the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_trace_len(trace: *const SparkTrace, out: *mut u64) -> SparkStatus {
    guard(|| write_out(out, ref_arg(trace, "trace")?.0.len() as u64, "out"))
}

/// Full trace as JSON; free with [`spark_string_free`].
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_trace_to_json(trace: *const SparkTrace, out: *mut *mut c_char) -> SparkStatus {
    guard(|| {
        let json = check(ref_arg(trace, "trace")?.0.to_json())?;
        write_out(out, into_c_string(json)?, "out")
    })
}

/// # Safety
/// `trace` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn spark_trace_free(trace: *mut SparkTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_report_compute(trace: *const SparkTrace, out: *mut *mut SparkReport) -> SparkStatus {
    guard(|| {
        let rep = check(report::compute(&ref_arg(trace, "trace")?.0))?;
        write_out(out, boxed(SparkReport(rep)), "out")
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_report_summary(report: *const SparkReport, out: *mut SparkSummary) -> SparkStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        let summary = SparkSummary {
            avg_pods: r.avg_pods,
            peak_pods: r.peak_pods,
            peak_desired: r.peak_desired,
            timeout_rate: r.timeout_rate,
            scale_lag: r.scale_lag.unwrap_or(f64::NAN),
            time_to_stabilize: r.time_to_stabilize.unwrap_or(f64::NAN),
            ingress_drop_fraction: r.ingress_drop_fraction.unwrap_or(f64::NAN),
            admitted: r.admitted,
            timed_out: r.timed_out,
            error_count: r.error_count,
            seed: r.seed,
        };
        write_out(out, summary, "out")
    })
}

/// Report as JSON; free with [`spark_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_report_to_json(report: *const SparkReport, out: *mut *mut c_char) -> SparkStatus {
    guard(|| {
        let json = check(ref_arg(report, "report")?.0.to_json())?;
        write_out(out, into_c_string(json)?, "out")
    })
}

/// Comparison of `candidate` against `baseline` as JSON; free with
/// [`spark_string_free`]. Fails when the reports have different seeds.
///
/// # Safety
/// Both reports must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_report_compare_json(
    baseline: *const SparkReport,
    candidate: *const SparkReport,
    out: *mut *mut c_char,
) -> SparkStatus {
    guard(|| {
        let cmp = check(report::compare(
            &ref_arg(baseline, "baseline")?.0,
            &ref_arg(candidate, "candidate")?.0,
        ))?;
        write_out(out, into_c_string(check(cmp.to_json())?)?, "out")
    })
}

/// # Safety
/// `report` must be a handle from this library or NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn spark_report_free(report: *mut SparkReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Percent change from `baseline` to `candidate`. Fails with
/// `InvalidArgument` when undefined (non-zero against a zero baseline).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_relative_delta(baseline: f64, candidate: f64, out: *mut f64) -> SparkStatus {
    guard(|| match report::relative_delta(baseline, candidate) {
        Some(d) => write_out(out, d, "out"),
        None => {
            set_error("relative delta undefined against a zero baseline");
            Err(SparkStatus::InvalidArgument)
        }
    })
}

/// Legitimacy score of a response mix and whether it meets `threshold`.
///
/// # Safety
/// `score` and `legitimate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spark_legitimacy_score(
    http_2xx: u64,
    errors: u64,
    threshold: f64,
    score: *mut f64,
    legitimate: *mut bool,
) -> SparkStatus {
    guard(|| {
        if score.is_null() || legitimate.is_null() {
            set_error("output pointer is null");
            return Err(SparkStatus::NullPointer);
        }
        let s = LegitimacySignal::from_counts(http_2xx, errors, threshold);
        write_out(score, s.score, "score")?;
        write_out(legitimate, s.legitimate, "legitimate")
    })
}

/// # Safety
/// `s` must be a string returned by this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn spark_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, SparkStatus> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        set_error("string contains an interior NUL");
        SparkStatus::Runtime
    })
}
