//! C interface to `ctrw-core`.
//!
//! Objects cross the boundary as opaque handles created by `ctrw_*_new`-style functions and
//! released by the matching `*_free`. Every fallible call returns a [`CtrwStatus`]; on failure
//! the message is kept per thread and read with [`ctrw_last_error_message`]. Panics never
//! unwind into C: they are caught and reported as `CTRW_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctrw_core::kernels::{BetaFn, DirectionLaw, DriftFn, ModelSpec};
use ctrw_core::payoff::Payoff;
use ctrw_core::sde_process::{sample_marginals, MarginalSample, StepControl};
use ctrw_core::solvers::{solve_backward, solve_forward, GridField, GridParams, Mollifier};
use ctrw_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrwStatus {
    Ok = 0,
    /// Null pointer, bad length, or malformed text.
    InvalidArgument = 1,
    /// Parameters outside the model's domain.
    Domain = 2,
    /// Step budget spent, instability, or quadrature failure.
    Numerical = 3,
    Unsupported = 4,
    /// Caller buffer shorter than the data.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque model handle.
pub struct CtrwModel(ModelSpec);

/// Opaque Monte Carlo sample handle.
pub struct CtrwSample(MarginalSample);

/// Opaque grid solution handle.
pub struct CtrwField(GridField);

/// Uniform grid: space [-half_width, half_width] with step dx, time [s, t_end] with step dt.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtrwGrid {
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
    pub s: f64,
    pub t_end: f64,
}

impl From<CtrwGrid> for GridParams {
    fn from(g: CtrwGrid) -> Self {
        GridParams { half_width: g.half_width, dx: g.dx, dt: g.dt, s: g.s, t_end: g.t_end }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> CtrwStatus {
    match e {
        Error::Unsupported(_) => CtrwStatus::Unsupported,
        e if e.is_numerical() => CtrwStatus::Numerical,
        _ => CtrwStatus::Domain,
    }
}

struct Fail(CtrwStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(CtrwStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, translating errors and panics into a status and the thread's last error.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CtrwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CtrwStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CtrwStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(CtrwStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(invalid("buffer is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctrw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to fit)
/// and returns the full message length excluding the NUL. Passing `len = 0` only queries the length.
///
/// # Safety
/// `buf` must be valid for `len` bytes when `len > 0`.
#[no_mangle]
pub unsafe extern "C" fn ctrw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if len > 0 && !buf.is_null() {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a model from JSON, e.g. `{"kind":"subdiffusion","beta":0.5}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_from_json(json: *const c_char, out: *mut *mut CtrwModel) -> CtrwStatus {
    guard(|| {
        if json.is_null() {
            return Err(invalid("json is null"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| invalid("json is not UTF-8"))?;
        let model: ModelSpec = serde_json::from_str(text).map_err(|e| invalid(&e.to_string()))?;
        model.check()?;
        emit(out, CtrwModel(model))
    })
}

/// Subdiffusion of order `beta` in the drift `amplitude`·sin(x)·cos(t) (0 for none).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_subdiffusion(beta: f64, amplitude: f64, out: *mut *mut CtrwModel) -> CtrwStatus {
    guard(|| {
        let drift = if amplitude == 0.0 { DriftFn::Zero } else { DriftFn::SinCos { amplitude } };
        let model = ModelSpec::subdiffusion(beta, drift);
        model.check()?;
        emit(out, CtrwModel(model))
    })
}

/// Variable order β(x) = mid + amplitude·tanh(x / scale).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_variable_order(mid: f64, amplitude: f64, scale: f64, out: *mut *mut CtrwModel) -> CtrwStatus {
    guard(|| {
        let model = ModelSpec::variable_order(BetaFn::Tanh { mid, amplitude, scale, center: 0.0 });
        model.check()?;
        emit(out, CtrwModel(model))
    })
}

/// Unbiased unit-speed Lévy walk with isotropic directions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_levy_walk(beta: f64, dimension: usize, out: *mut *mut CtrwModel) -> CtrwStatus {
    guard(|| {
        let model = ModelSpec::levy_walk(beta, DriftFn::Zero, DirectionLaw::Uniform, dimension);
        model.check()?;
        emit(out, CtrwModel(model))
    })
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_dimension(model: *const CtrwModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dimension())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctrw_model_free(model: *mut CtrwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Samples the lagging (X) and leading (Y) limit processes at `times` on `n_paths` paths.
///
/// # Safety
/// `x0` must hold `dim` values, `times` must hold `n_times` values, `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ctrw_sample_marginals(
    model: *const CtrwModel,
    x0: *const f64,
    dim: usize,
    t0: f64,
    times: *const f64,
    n_times: usize,
    n_paths: usize,
    dr: f64,
    seed: u64,
    out: *mut *mut CtrwSample,
) -> CtrwStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let x0 = slice(x0, dim, "x0")?;
        let times = slice(times, n_times, "times")?;
        let sample = sample_marginals(&model.0, x0, t0, times, n_paths, StepControl::with_dr(dr), seed)?;
        emit(out, CtrwSample(sample))
    })
}

/// Number of values in each of the X and Y arrays: paths × times × dimension.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctrw_sample_len(sample: *const CtrwSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.x_values.len())
}

/// Paths that spent their step budget and were dropped.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctrw_sample_failures(sample: *const CtrwSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.failures)
}

/// Copies X values, laid out [path][time][coordinate].
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctrw_sample_copy_x(sample: *const CtrwSample, buf: *mut f64, len: usize) -> CtrwStatus {
    guard(|| copy_out(&handle(sample, "sample")?.0.x_values, buf, len))
}

/// Copies Y values, laid out like X.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctrw_sample_copy_y(sample: *const CtrwSample, buf: *mut f64, len: usize) -> CtrwStatus {
    guard(|| copy_out(&handle(sample, "sample")?.0.y_values, buf, len))
}

/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctrw_sample_free(sample: *mut CtrwSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Forward density from a unit mass at (x0, grid.s).
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_solve_forward(model: *const CtrwModel, x0: f64, grid: CtrwGrid, out: *mut *mut CtrwField) -> CtrwStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let field = solve_forward(&model.0, x0, &grid.into())?;
        emit(out, CtrwField(field))
    })
}

/// Backward expectation of a Gaussian bump payoff at time `t`, default mollifier.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_solve_backward_bump(
    model: *const CtrwModel,
    center: f64,
    width: f64,
    t: f64,
    grid: CtrwGrid,
    out: *mut *mut CtrwField,
) -> CtrwStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let grid: GridParams = grid.into();
        let payoff = Payoff::bump(center, width);
        let field = solve_backward(&model.0, &payoff, t, &Mollifier::for_step(grid.dt), &grid)?;
        emit(out, CtrwField(field))
    })
}

/// Number of time rows and space nodes.
///
/// # Safety
/// `field` must be a live handle; `nt` and `nx` writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_shape(field: *const CtrwField, nt: *mut usize, nx: *mut usize) -> CtrwStatus {
    guard(|| {
        let f = handle(field, "field")?;
        if nt.is_null() || nx.is_null() {
            return Err(invalid("output pointer is null"));
        }
        *nt = f.0.nt();
        *nx = f.0.nx();
        Ok(())
    })
}

/// Copies values, time-major: `buf[m * nx + i]`.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_copy_values(field: *const CtrwField, buf: *mut f64, len: usize) -> CtrwStatus {
    guard(|| copy_out(&handle(field, "field")?.0.values, buf, len))
}

/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_copy_x(field: *const CtrwField, buf: *mut f64, len: usize) -> CtrwStatus {
    guard(|| copy_out(&handle(field, "field")?.0.x_grid, buf, len))
}

/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_copy_t(field: *const CtrwField, buf: *mut f64, len: usize) -> CtrwStatus {
    guard(|| copy_out(&handle(field, "field")?.0.t_grid, buf, len))
}

/// Linear interpolation in x at the time row nearest t.
///
/// # Safety
/// `field` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_sample(field: *const CtrwField, x: f64, t: f64, value: *mut f64) -> CtrwStatus {
    guard(|| {
        let f = handle(field, "field")?;
        if value.is_null() {
            return Err(invalid("output pointer is null"));
        }
        *value = f.0.sample(x, t)?;
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctrw_field_free(field: *mut CtrwField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}
