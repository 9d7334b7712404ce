//! C ABI for the numerical GP Kalman filter.
//!
//! A filter is an opaque `GpkfFilter*` created from a preset name or
//! config text and released with [`gpkf_filter_free`]. Every fallible
//! call returns a [`GpkfStatus`]; on failure the message is available
//! from [`gpkf_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gpkf::advection::sample_measurements;
use gpkf::config::{parse_config_str, preset, RunConfig};
use gpkf::filter::{init_state, step, FilterState, MeasurementBatch};
use gpkf::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpkfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque filter handle.
pub struct GpkfFilter {
    cfg: RunConfig,
    state: FilterState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> GpkfStatus {
    match e {
        Error::Config { .. } => GpkfStatus::Config,
        Error::Step { source, .. } => status_of(source),
        e if e.is_numerical() => GpkfStatus::Numerical,
        _ => GpkfStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GpkfStatus, String)>) -> GpkfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpkfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GpkfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (GpkfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GpkfStatus, String) {
    (GpkfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GpkfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GpkfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (GpkfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn build(cfg: RunConfig) -> Result<Box<GpkfFilter>, (GpkfStatus, String)> {
    let s = &cfg.scenario;
    let state = init_state(|x| s.initial_estimate(x), s.n_init_samples, &cfg.theta0, &cfg.filter).map_err(lib_err)?;
    Ok(Box::new(GpkfFilter { cfg, state }))
}

unsafe fn create(out: *mut *mut GpkfFilter, make: impl FnOnce() -> Result<RunConfig, (GpkfStatus, String)>) -> GpkfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let handle = build(make()?)?;
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Creates a filter from a named preset such as `"advection-ifac"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_from_preset(name: *const c_char, out: *mut *mut GpkfFilter) -> GpkfStatus {
    create(out, || {
        let name = read_str(name, "name")?;
        preset(name).map_err(lib_err)
    })
}

/// Creates a filter from config text in `key = value` form. `preset_name`
/// may be null.
///
/// # Safety
/// `text` and a non-null `preset_name` must be NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_from_config(
    text: *const c_char,
    preset_name: *const c_char,
    out: *mut *mut GpkfFilter,
) -> GpkfStatus {
    create(out, || {
        let text = read_str(text, "text")?;
        let p = if preset_name.is_null() {
            None
        } else {
            Some(read_str(preset_name, "preset_name")?)
        };
        parse_config_str(text, p).map_err(lib_err)
    })
}

/// Releases a filter. Null is ignored.
///
/// # Safety
/// `filter` must come from a constructor of this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_free(filter: *mut GpkfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Number of test grid points, or 0 for a null handle.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_grid_len(filter: *const GpkfFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.cfg.filter.test_grid.len())
}

/// Index of the last completed step (0 after construction).
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_step_index(filter: *const GpkfFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.state.t)
}

/// Number of boundary values each step expects.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_boundary_len(filter: *const GpkfFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.cfg.filter.boundary_points.len())
}

unsafe fn copy_out(
    filter: *const GpkfFilter,
    out: *mut f64,
    len: usize,
    pick: impl FnOnce(&GpkfFilter) -> Vec<f64>,
) -> GpkfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| null("filter"))?;
        let values = pick(f);
        if len < values.len() {
            return Err((
                GpkfStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(&values);
        Ok(())
    })
}

/// Copies the test grid into `out[0..grid_len]`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_grid(filter: *const GpkfFilter, out: *mut f64, len: usize) -> GpkfStatus {
    copy_out(filter, out, len, |f| f.cfg.filter.test_grid.clone())
}

/// Copies the posterior mean into `out[0..grid_len]`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_mean(filter: *const GpkfFilter, out: *mut f64, len: usize) -> GpkfStatus {
    copy_out(filter, out, len, |f| f.state.estimate.mean.iter().cloned().collect())
}

/// Copies the posterior marginal variances into `out[0..grid_len]`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_variance(filter: *const GpkfFilter, out: *mut f64, len: usize) -> GpkfStatus {
    copy_out(filter, out, len, |f| f.state.estimate.cov.diagonal().iter().cloned().collect())
}

/// Writes `(sigma2_se, l, sigma2_q, sigma2_r)` into `out[0..4]`.
///
/// # Safety
/// `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_hyperparams(filter: *const GpkfFilter, out: *mut f64) -> GpkfStatus {
    copy_out(filter, out, 4, |f| {
        let th = f.state.theta;
        vec![th.sigma2_se, th.length_scale, th.sigma2_q, th.sigma2_r]
    })
}

fn advance(f: &mut GpkfFilter, batch: MeasurementBatch) -> Result<(), (GpkfStatus, String)> {
    f.state = step(&f.state, &batch, &f.cfg.filter).map_err(lib_err)?;
    Ok(())
}

/// Advances one step with `n` measurements and `n_boundary` boundary
/// values. The handle is unchanged on failure.
///
/// # Safety
/// The arrays must hold `n`, `n` and `n_boundary` doubles respectively;
/// they may be null when their length is 0.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_step(
    filter: *mut GpkfFilter,
    locations: *const f64,
    values: *const f64,
    n: usize,
    boundary_values: *const f64,
    n_boundary: usize,
) -> GpkfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| null("filter"))?;
        let batch = MeasurementBatch {
            t: f.state.t + 1,
            locations: read_slice(locations, n, "locations")?.to_vec(),
            values: read_slice(values, n, "values")?.to_vec(),
            boundary_values: read_slice(boundary_values, n_boundary, "boundary_values")?.to_vec(),
        };
        advance(f, batch)
    })
}

/// Advances one step using the configured scenario's simulated sensors.
///
/// # Safety
/// `filter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gpkf_filter_step_simulated(filter: *mut GpkfFilter) -> GpkfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| null("filter"))?;
        let batch = sample_measurements(f.state.t + 1, &f.cfg.scenario);
        advance(f, batch)
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gpkf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
