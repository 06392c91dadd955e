//! C interface to the auction engine.
//!
//! Instances and outcomes are opaque handles created and released by this
//! library. Every fallible call returns a [`PcStatus`]; on failure the
//! message is available from [`pc_last_error`] on the same thread.
//! Rationals cross the boundary as strings such as `"3/4"`, which the
//! caller releases with [`pc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polyclinch::auction::{run_pca_untraced, Allocation};
use polyclinch::market::{parse_instance, preprocess, validate, MarketInstance, SellerValues};
use polyclinch::opt::optimal_lw_allocation;
use polyclinch::single_sample::run_mechanism_untraced;
use polyclinch::verify::verify_auction;
use polyclinch::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Config = 5,
    ContractViolation = 6,
    EnumerationRefused = 7,
    OutOfRange = 8,
    Internal = 9,
    Panic = 10,
}

/// A validated market instance.
pub struct PcInstance {
    instance: MarketInstance,
}

/// Final allocation of one mechanism run.
pub struct PcOutcome {
    instance: MarketInstance,
    allocation: Allocation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(PcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => PcStatus::Parse,
            Error::Validation { .. } => PcStatus::Validation,
            Error::Config(_) => PcStatus::Config,
            Error::ContractViolation(_) => PcStatus::ContractViolation,
            Error::EnumerationRefused { .. } => PcStatus::EnumerationRefused,
            Error::Internal(_) | Error::Integrity(_) | Error::Io(_) => PcStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PcStatus::NullArgument, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            PcStatus::Panic
        }
    }
}

unsafe fn instance_ref<'a>(handle: *const PcInstance) -> Result<&'a MarketInstance, Failure> {
    handle
        .as_ref()
        .map(|h| &h.instance)
        .ok_or_else(|| null("instance"))
}

unsafe fn outcome_ref<'a>(handle: *const PcOutcome) -> Result<&'a PcOutcome, Failure> {
    handle.as_ref().ok_or_else(|| null("outcome"))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let text = CString::new(text)
        .map_err(|_| Failure(PcStatus::Internal, "string contains a nul byte".into()))?;
    *out = text.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates an instance document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_instance_from_json(
    json: *const c_char,
    out: *mut *mut PcInstance,
) -> PcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(PcStatus::InvalidUtf8, e.to_string()))?;
        let instance = parse_instance(text)?;
        validate(&instance).into_result()?;
        *out = Box::into_raw(Box::new(PcInstance { instance }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`pc_instance_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pc_instance_free(handle: *mut PcInstance) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of real buyers, or 0 for a null handle.
///
/// # Safety
/// `handle` must be a live instance or null.
#[no_mangle]
pub unsafe extern "C" fn pc_instance_buyer_count(handle: *const PcInstance) -> usize {
    handle.as_ref().map_or(0, |h| h.instance.buyers.len())
}

/// Number of sellers, or 0 for a null handle.
///
/// # Safety
/// `handle` must be a live instance or null.
#[no_mangle]
pub unsafe extern "C" fn pc_instance_seller_count(handle: *const PcInstance) -> usize {
    handle.as_ref().map_or(0, |h| h.instance.sellers.len())
}

unsafe fn run_into(
    handle: *const PcInstance,
    out: *mut *mut PcOutcome,
    run: impl FnOnce(&MarketInstance) -> polyclinch::Result<Allocation>,
) -> PcStatus {
    guard(|| {
        let instance = instance_ref(handle)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let allocation = run(instance)?;
        *out = Box::into_raw(Box::new(PcOutcome {
            instance: instance.clone(),
            allocation,
        }));
        Ok(())
    })
}

/// Runs the clinching auction with the sellers' bids as their values.
///
/// # Safety
/// `handle` must be a live instance; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_auction(
    handle: *const PcInstance,
    out: *mut *mut PcOutcome,
) -> PcStatus {
    run_into(handle, out, |instance| {
        let pm = preprocess(instance, SellerValues::Bids)?;
        Ok(run_pca_untraced(&pm)?.allocation)
    })
}

/// Runs the single-sample mechanism; every seller needs a sample.
///
/// # Safety
/// `handle` must be a live instance; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_single_sample(
    handle: *const PcInstance,
    out: *mut *mut PcOutcome,
) -> PcStatus {
    run_into(handle, out, |instance| {
        Ok(run_mechanism_untraced(instance)?.allocation)
    })
}

/// # Safety
/// `handle` must come from a run function or be null.
#[no_mangle]
pub unsafe extern "C" fn pc_outcome_free(handle: *mut PcOutcome) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// The whole outcome as a JSON document.
///
/// # Safety
/// `handle` must be a live outcome; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_outcome_json(
    handle: *const PcOutcome,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let o = outcome_ref(handle)?;
        let text = serde_json::to_string(&o.allocation.to_json(&o.instance)).expect("serializable");
        write_string(out, text)
    })
}

/// Goods and payment of real buyer `index`.
///
/// # Safety
/// `handle` must be a live outcome; `goods` and `payment` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_outcome_buyer(
    handle: *const PcOutcome,
    index: usize,
    goods: *mut *mut c_char,
    payment: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let o = outcome_ref(handle)?;
        if goods.is_null() || payment.is_null() {
            return Err(null("output pointer"));
        }
        let a = &o.allocation;
        if index >= a.goods.len() {
            return Err(Failure(
                PcStatus::OutOfRange,
                format!("buyer index {index} out of range 0..{}", a.goods.len()),
            ));
        }
        write_string(goods, a.goods[index].to_string())?;
        write_string(payment, a.payments[index].to_string())
    })
}

/// Liquid welfare of the outcome under true valuations.
///
/// # Safety
/// `handle` must be a live outcome; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_outcome_liquid_welfare(
    handle: *const PcOutcome,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let o = outcome_ref(handle)?;
        write_string(out, o.allocation.liquid_welfare(&o.instance).to_string())
    })
}

/// The optimal liquid welfare of the instance.
///
/// # Safety
/// `handle` must be a live instance; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_optimal_liquid_welfare(
    handle: *const PcInstance,
    out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let instance = instance_ref(handle)?;
        let pm = preprocess(instance, SellerValues::Bids)?;
        write_string(out, optimal_lw_allocation(&pm)?.lw_opt.to_string())
    })
}

/// Checks the auction's guarantees on the instance. Writes the JSON report
/// and the report's exit code (0 pass, 1 failure, 2 gated check skipped).
///
/// # Safety
/// `handle` must be a live instance; `report` and `exit_code` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pc_verify(
    handle: *const PcInstance,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> PcStatus {
    guard(|| {
        let instance = instance_ref(handle)?;
        if exit_code.is_null() {
            return Err(null("exit code pointer"));
        }
        let checks = verify_auction(instance)?;
        write_string(
            report,
            serde_json::to_string(&checks.to_json()).expect("serializable"),
        )?;
        *exit_code = checks.exit_code();
        Ok(())
    })
}
