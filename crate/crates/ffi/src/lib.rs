//! C ABI over the `fedprog` library.
//!
//! Every fallible function returns a [`FedprogStatus`]; on failure the
//! message is kept per thread and read with [`fedprog_last_error_message`].
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Panics never unwind into C; they are
//! reported as [`FedprogStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fedprog::experiments::{run_experiment, write_outcome, ExperimentConfig, ExperimentOutcome};
use fedprog::federation::{fed_avg, ModelUpdate, PipelineMode};
use fedprog::policy::{
    cost_rate, optimal_periodic_trigger, unavailable_days, unused_life, ReplacementEconomics,
    ReplacementKind,
};
use fedprog::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedprogStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Shape = 3,
    Contract = 4,
    Numeric = 5,
    Domain = 6,
    Generation = 7,
    Parse = 8,
    Config = 9,
    Io = 10,
    NotFound = 11,
    Panic = 12,
}

/// Cost parameters of the replacement policies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedprogEconomics {
    /// Cost of a preventive replacement.
    pub c_r: f64,
    /// Cost of a corrective replacement.
    pub c_f: f64,
    /// Periods between a replacement request and the crew's arrival.
    pub t_c: u32,
    /// Periods a replacement takes.
    pub t_m: u32,
}

impl From<FedprogEconomics> for ReplacementEconomics {
    fn from(e: FedprogEconomics) -> Self {
        ReplacementEconomics {
            c_r: e.c_r,
            c_f: e.c_f,
            t_c: e.t_c,
            t_m: e.t_m,
            ..ReplacementEconomics::default()
        }
    }
}

/// Byte buffer owned by the library; release with [`fedprog_buffer_free`].
#[repr(C)]
#[derive(Debug)]
pub struct FedprogBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Decoded model update (opaque).
pub struct FedprogUpdate {
    update: ModelUpdate,
    client_id: CString,
}

/// Finished experiment (opaque).
pub struct FedprogExperiment {
    outcome: ExperimentOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FedprogStatus {
    match err.root() {
        Error::Shape(_) => FedprogStatus::Shape,
        Error::Contract(_) => FedprogStatus::Contract,
        Error::Numeric(_) => FedprogStatus::Numeric,
        Error::Domain(_) => FedprogStatus::Domain,
        Error::Generation(_) => FedprogStatus::Generation,
        Error::Parse { .. } => FedprogStatus::Parse,
        Error::Config(_) => FedprogStatus::Config,
        Error::Io { .. } => FedprogStatus::Io,
        Error::Stage { .. } => unreachable!("root() skips stage wrappers"),
    }
}

/// Failure raised inside the FFI layer itself.
struct Failure(FedprogStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FedprogStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FedprogStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FedprogStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            FedprogStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(FedprogStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null if it succeeded.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fedprog_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fedprog_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default cost parameters.
#[no_mangle]
pub extern "C" fn fedprog_economics_default() -> FedprogEconomics {
    let d = ReplacementEconomics::default();
    FedprogEconomics {
        c_r: d.c_r,
        c_f: d.c_f,
        t_c: d.t_c,
        t_m: d.t_m,
    }
}

/// Long-run cost rate of one battery. A negative `t_star` means the policy
/// never triggered. `out_preventive` receives whether the replacement was
/// preventive.
///
/// # Safety
/// `econ`, `out_cost` and `out_preventive` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedprog_cost_rate(
    t_star: i64,
    t_f: u32,
    econ: *const FedprogEconomics,
    out_cost: *mut f64,
    out_preventive: *mut bool,
) -> FedprogStatus {
    guard(|| {
        let e: ReplacementEconomics = (*in_ref(econ, "econ")?).into();
        let t = u32::try_from(t_star).ok();
        let (c, kind) = cost_rate(t, t_f, &e)?;
        *out_ref(out_cost, "out_cost")? = c;
        *out_ref(out_preventive, "out_preventive")? = kind == ReplacementKind::Preventive;
        Ok(())
    })
}

/// Unused life of a preventive replacement; a contract error otherwise.
///
/// # Safety
/// `econ` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedprog_unused_life(
    t_star: u32,
    t_f: u32,
    econ: *const FedprogEconomics,
    out: *mut i64,
) -> FedprogStatus {
    guard(|| {
        let e: ReplacementEconomics = (*in_ref(econ, "econ")?).into();
        *out_ref(out, "out")? = unused_life(t_star, t_f, &e)?;
        Ok(())
    })
}

/// Unavailable periods of one battery. A negative `t_star` means no trigger.
///
/// # Safety
/// `econ` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedprog_unavailable_days(
    t_star: i64,
    t_f: u32,
    econ: *const FedprogEconomics,
    out: *mut u32,
) -> FedprogStatus {
    guard(|| {
        let e: ReplacementEconomics = (*in_ref(econ, "econ")?).into();
        *out_ref(out, "out")? = unavailable_days(u32::try_from(t_star).ok(), t_f, &e);
        Ok(())
    })
}

/// Fleet-wide periodic trigger age minimizing the summed cost rate.
///
/// # Safety
/// The arrays must hold at least the given number of elements; `econ` and
/// `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedprog_optimal_periodic_trigger(
    failure_times: *const u32,
    n_failure_times: usize,
    candidates: *const u32,
    n_candidates: usize,
    econ: *const FedprogEconomics,
    out: *mut u32,
) -> FedprogStatus {
    guard(|| {
        let e: ReplacementEconomics = (*in_ref(econ, "econ")?).into();
        let f = in_slice(failure_times, n_failure_times, "failure_times")?;
        let c = in_slice(candidates, n_candidates, "candidates")?;
        *out_ref(out, "out")? = optimal_periodic_trigger(f, c, &e)?;
        Ok(())
    })
}

fn wrap_update(update: ModelUpdate) -> Result<*mut FedprogUpdate, Failure> {
    let client_id = CString::new(update.client_id.clone())
        .map_err(|_| Failure(FedprogStatus::InvalidUtf8, "client id contains NUL".into()))?;
    Ok(Box::into_raw(Box::new(FedprogUpdate { update, client_id })))
}

/// Decodes a wire-format model update.
///
/// # Safety
/// `bytes` must hold `len` bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_decode(
    bytes: *const u8,
    len: usize,
    out: *mut *mut FedprogUpdate,
) -> FedprogStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let update = ModelUpdate::decode(in_slice(bytes, len, "bytes")?)?;
        *out = wrap_update(update)?;
        Ok(())
    })
}

/// Encodes an update back to its wire format.
///
/// # Safety
/// `update` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_encode(
    update: *const FedprogUpdate,
    out: *mut FedprogBuffer,
) -> FedprogStatus {
    guard(|| {
        let u = in_ref(update, "update")?;
        let out = out_ref(out, "out")?;
        let bytes = u.update.encode().into_boxed_slice();
        let len = bytes.len();
        *out = FedprogBuffer {
            data: Box::into_raw(bytes).cast(),
            len,
        };
        Ok(())
    })
}

/// Client id of an update; valid while the handle lives.
///
/// # Safety
/// `update` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_client_id(update: *const FedprogUpdate) -> *const c_char {
    update.as_ref().map_or(ptr::null(), |u| u.client_id.as_ptr())
}

/// Number of rows the client trained on; 0 for a null handle.
///
/// # Safety
/// `update` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_sample_count(update: *const FedprogUpdate) -> u64 {
    update.as_ref().map_or(0, |u| u.update.sample_count)
}

/// Number of weight snapshots in an update; 0 for a null handle.
///
/// # Safety
/// `update` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_snapshot_count(update: *const FedprogUpdate) -> usize {
    update.as_ref().map_or(0, |u| u.update.snapshots.len())
}

/// Borrows the flat values of snapshot `index`; valid while the handle lives.
///
/// # Safety
/// `update` must be a live handle; `out_values` and `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_values(
    update: *const FedprogUpdate,
    index: usize,
    out_values: *mut *const f64,
    out_len: *mut usize,
) -> FedprogStatus {
    guard(|| {
        let u = in_ref(update, "update")?;
        let snap = u.update.snapshots.get(index).ok_or_else(|| {
            Failure(
                FedprogStatus::NotFound,
                format!("snapshot {index} of {}", u.update.snapshots.len()),
            )
        })?;
        *out_ref(out_values, "out_values")? = snap.values().as_ptr();
        *out_ref(out_len, "out_len")? = snap.len();
        Ok(())
    })
}

/// Unweighted average of `n` updates, summed in client-id order. The result
/// carries the first update's id and the total sample count.
///
/// # Safety
/// `updates` must hold `n` live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedprog_fed_avg(
    updates: *const *const FedprogUpdate,
    n: usize,
    out: *mut *mut FedprogUpdate,
) -> FedprogStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let handles = in_slice(updates, n, "updates")?;
        let owned = handles
            .iter()
            .map(|&h| in_ref(h, "updates[i]").map(|u| u.update.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let snapshots = fed_avg(&owned)?;
        let first = owned.iter().min_by(|a, b| a.client_id.cmp(&b.client_id)).expect("non-empty");
        *out = wrap_update(ModelUpdate {
            client_id: first.client_id.clone(),
            stage: first.stage,
            snapshots,
            sample_count: owned.iter().map(|u| u.sample_count).sum(),
        })?;
        Ok(())
    })
}

/// Releases an update handle. Null is ignored.
///
/// # Safety
/// `update` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fedprog_update_free(update: *mut FedprogUpdate) {
    if !update.is_null() {
        drop(Box::from_raw(update));
    }
}

/// Releases a buffer's storage and resets it. Null or empty buffers are ignored.
///
/// # Safety
/// `buffer` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fedprog_buffer_free(buffer: *mut FedprogBuffer) {
    if let Some(b) = buffer.as_mut() {
        if !b.data.is_null() {
            drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
        }
        b.data = ptr::null_mut();
        b.len = 0;
    }
}

/// Loads a TOML config file and runs every configured variant.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedprog_experiment_run(
    config_path: *const c_char,
    out: *mut *mut FedprogExperiment,
) -> FedprogStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = PathBuf::from(in_str(config_path, "config_path")?);
        let cfg = ExperimentConfig::load(&path)?;
        let outcome = run_experiment(&cfg)?;
        *out = Box::into_raw(Box::new(FedprogExperiment { outcome }));
        Ok(())
    })
}

/// Mean test cost rate of the periodic baseline.
///
/// # Safety
/// `experiment` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedprog_experiment_periodic_cost_rate(
    experiment: *const FedprogExperiment,
    out: *mut f64,
) -> FedprogStatus {
    guard(|| {
        let x = in_ref(experiment, "experiment")?;
        *out_ref(out, "out")? = x.outcome.periodic.mean_cost_rate;
        Ok(())
    })
}

/// Mean test cost rate of a variant at its selected threshold.
///
/// # Safety
/// `experiment` must be a live handle, `variant` a NUL-terminated string,
/// and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fedprog_experiment_cost_rate(
    experiment: *const FedprogExperiment,
    variant: *const c_char,
    out: *mut f64,
) -> FedprogStatus {
    guard(|| {
        let x = in_ref(experiment, "experiment")?;
        let mode: PipelineMode = in_str(variant, "variant")?.parse()?;
        let v = x
            .outcome
            .variant(mode)
            .ok_or_else(|| Failure(FedprogStatus::NotFound, format!("variant `{mode}` was not run")))?;
        *out_ref(out, "out")? = v.report.selected.mean_cost_rate;
        Ok(())
    })
}

/// Writes reports, models, message logs and the comparison table to `dir`.
///
/// # Safety
/// `experiment` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fedprog_experiment_write(
    experiment: *const FedprogExperiment,
    dir: *const c_char,
) -> FedprogStatus {
    guard(|| {
        let x = in_ref(experiment, "experiment")?;
        let dir = PathBuf::from(in_str(dir, "dir")?);
        write_outcome(&dir, &x.outcome)?;
        Ok(())
    })
}

/// Releases an experiment handle. Null is ignored.
///
/// # Safety
/// `experiment` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fedprog_experiment_free(experiment: *mut FedprogExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}
