//! C ABI over the `pmqkd` engine.
//!
//! Conventions:
//! - every fallible function returns an `int32_t` status, `PMQKD_OK` on
//!   success, and writes results through out-pointers;
//! - objects are opaque handles created by `*_new`/producer functions and
//!   released with the matching `*_free`;
//! - strings returned to the caller are NUL-terminated UTF-8 and must be
//!   released with `pmqkd_string_free`;
//! - after a failure, `pmqkd_last_error` describes it until the next call on
//!   the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pmqkd::ingest::{parse_tally_str, tally_csv_string};
use pmqkd::{
    analytic_key_rate, optimize, reproduce_key_rate, simulate, Bounds, ChannelSpec, Error,
    ExperimentRecord, KeyRateResult, OptimizerConfig, ProtocolParams, ReproductionOptions,
};

pub const PMQKD_OK: i32 = 0;
pub const PMQKD_E_DOMAIN: i32 = 2;
pub const PMQKD_E_UNDEFINED_RATE: i32 = 3;
pub const PMQKD_E_NO_DATA: i32 = 4;
pub const PMQKD_E_SCHEMA: i32 = 5;
pub const PMQKD_E_USAGE: i32 = 6;
pub const PMQKD_E_IO: i32 = 7;
pub const PMQKD_E_SERIALIZE: i32 = 8;
/// A required pointer argument was null.
pub const PMQKD_E_NULL: i32 = 100;
/// A string argument was not valid UTF-8.
pub const PMQKD_E_UTF8: i32 = 101;
/// The engine panicked; the handle arguments should be considered lost.
pub const PMQKD_E_PANIC: i32 = 102;

/// Protocol and channel settings.
pub struct PmqkdParams(ProtocolParams);

/// Key-rate evaluation with every intermediate bound.
pub struct PmqkdResult(KeyRateResult);

/// Measured or simulated tally with its run metadata.
pub struct PmqkdRecord(ExperimentRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.code() as i32, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PMQKD_E_NULL, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PMQKD_OK,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PMQKD_E_PANIC
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure(PMQKD_E_UTF8, format!("{what}: {e}")))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(PMQKD_E_SERIALIZE, e.to_string()))
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure(PMQKD_E_SERIALIZE, e.to_string()))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next `pmqkd_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pmqkd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pmqkd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings at a total channel loss (dB) and total intensity.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_new(loss_db: f64, mu: f64, out: *mut *mut PmqkdParams) -> i32 {
    guard(|| {
        let params = ProtocolParams::new(ChannelSpec::from_loss_db(loss_db)?, mu);
        params.validate()?;
        unsafe { put(out, boxed(PmqkdParams(params)), "out") }
    })
}

/// Settings from a JSON object with the same fields as the JSON the
/// library emits.
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_from_json(text: *const c_char, out: *mut *mut PmqkdParams) -> i32 {
    guard(|| {
        let text = unsafe { str_arg(text, "text")? };
        let params: ProtocolParams = serde_json::from_str(text)
            .map_err(|e| Failure(PMQKD_E_SCHEMA, e.to_string()))?;
        params.validate()?;
        unsafe { put(out, boxed(PmqkdParams(params)), "out") }
    })
}

/// Settings as JSON.
///
/// # Safety
/// `params` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_to_json(params: *const PmqkdParams, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let p = unsafe { borrow(params, "params")? };
        let s = c_string(json(&p.0)?)?;
        unsafe { put(out, s, "out") }
    })
}

/// Applies `edit` to a copy and keeps it only if it validates.
unsafe fn update(params: *mut PmqkdParams, edit: impl FnOnce(&mut ProtocolParams)) -> i32 {
    guard(|| {
        let p = unsafe { borrow_mut(params, "params")? };
        let mut next = p.0;
        edit(&mut next);
        next.validate()?;
        p.0 = next;
        Ok(())
    })
}

/// Total intensity. The handle is unchanged if the value is rejected.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_set_mu(params: *mut PmqkdParams, value: f64) -> i32 {
    unsafe { update(params, |p| p.mu = value) }
}

/// Number of rounds N. The handle is unchanged if the value is rejected.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_set_n_rounds(params: *mut PmqkdParams, value: f64) -> i32 {
    unsafe { update(params, |p| p.n_rounds = value) }
}

/// Test-sample fraction. The handle is unchanged if the value is rejected.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_set_p_s(params: *mut PmqkdParams, value: f64) -> i32 {
    unsafe { update(params, |p| p.p_s = value) }
}

/// Phase slices M. The handle is unchanged if the value is rejected.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_set_m_slices(params: *mut PmqkdParams, value: u32) -> i32 {
    unsafe { update(params, |p| p.m_slices = value) }
}

/// Error-correction efficiency. The handle is unchanged if the value is rejected.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_set_f_ec(params: *mut PmqkdParams, value: f64) -> i32 {
    unsafe { update(params, |p| p.f_ec = value) }
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_params_free(params: *mut PmqkdParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

/// Key rate from the channel model.
///
/// # Safety
/// `params` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_keyrate(params: *const PmqkdParams, out: *mut *mut PmqkdResult) -> i32 {
    guard(|| {
        let p = unsafe { borrow(params, "params")? };
        let r = analytic_key_rate(&p.0)?;
        unsafe { put(out, boxed(PmqkdResult(r)), "out") }
    })
}

/// Maximizes the rate over `mu` and `p_s` with default bounds and search
/// settings. Any out-pointer may be null.
///
/// # Safety
/// `params` must be null or a live handle; out-pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_optimize(
    params: *const PmqkdParams,
    mu_opt: *mut f64,
    p_s_opt: *mut f64,
    rate_opt: *mut f64,
) -> i32 {
    guard(|| {
        let p = unsafe { borrow(params, "params")? };
        let config = OptimizerConfig {
            record_trace: false,
            ..OptimizerConfig::default()
        };
        let o = optimize(&p.0, &Bounds::default(), &config)?;
        for (dst, v) in [(mu_opt, o.mu_opt), (p_s_opt, o.p_s_opt), (rate_opt, o.rate_opt)] {
            if !dst.is_null() {
                unsafe { dst.write(v) };
            }
        }
        Ok(())
    })
}

/// Secret-key bits per round.
///
/// # Safety
/// `result` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_result_rate(result: *const PmqkdResult, out: *mut f64) -> i32 {
    guard(|| {
        let r = unsafe { borrow(result, "result")? };
        unsafe { put(out, r.0.rate, "out") }
    })
}

/// The full evaluation (inputs, bounds, budget, notes) as JSON.
///
/// # Safety
/// `result` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_result_to_json(result: *const PmqkdResult, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let r = unsafe { borrow(result, "result")? };
        let s = c_string(json(&r.0)?)?;
        unsafe { put(out, s, "out") }
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_result_free(result: *mut PmqkdResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Monte Carlo run of `params.n_rounds` rounds.
///
/// # Safety
/// `params` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_simulate(
    params: *const PmqkdParams,
    seed: u64,
    out: *mut *mut PmqkdRecord,
) -> i32 {
    guard(|| {
        let p = unsafe { borrow(params, "params")? };
        let tally = simulate(&p.0, seed)?;
        let record = ExperimentRecord {
            loss_db: p.0.channel.total_loss_db(),
            n_rounds: p.0.n_rounds,
            mu: p.0.mu,
            p_s: p.0.p_s,
            tally,
            component_losses: None,
        };
        unsafe { put(out, boxed(PmqkdRecord(record)), "out") }
    })
}

/// Parses a tally in the CSV exchange format.
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_record_from_csv(text: *const c_char, out: *mut *mut PmqkdRecord) -> i32 {
    guard(|| {
        let text = unsafe { str_arg(text, "text")? };
        let record = parse_tally_str(text)?;
        unsafe { put(out, boxed(PmqkdRecord(record)), "out") }
    })
}

/// Serializes a tally to the CSV exchange format.
///
/// # Safety
/// `record` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_record_to_csv(record: *const PmqkdRecord, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let r = unsafe { borrow(record, "record")? };
        let s = c_string(tally_csv_string(&r.0)?)?;
        unsafe { put(out, s, "out") }
    })
}

/// Key rate from counts, treating rows as the sifted key and using the
/// default security budget and conventions of `params`.
///
/// # Safety
/// Handles must be null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_reproduce(
    record: *const PmqkdRecord,
    params: *const PmqkdParams,
    out: *mut *mut PmqkdResult,
) -> i32 {
    guard(|| {
        let r = unsafe { borrow(record, "record")? };
        let p = unsafe { borrow(params, "params")? };
        let options = ReproductionOptions {
            f_ec: p.0.f_ec,
            conventions: p.0.conventions,
            ..ReproductionOptions::default()
        };
        let result = reproduce_key_rate(&r.0, &p.0.budget, &options)?;
        unsafe { put(out, boxed(PmqkdResult(result)), "out") }
    })
}

/// # Safety
/// `record` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_record_free(record: *mut PmqkdRecord) {
    if !record.is_null() {
        drop(unsafe { Box::from_raw(record) });
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmqkd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
