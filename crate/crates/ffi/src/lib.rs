//! C ABI over the qline solvers.
//!
//! Every fallible entry point returns a [`QlineStatus`]; on a non-zero code
//! [`qline_last_error`] describes what went wrong on the calling thread.
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use qline::problems::{by_name, Problem};
use qline::psdfactor::psd_modify;
use qline::qcalc::QSchedule;
use qline::usolve::{solve_bfgs, solve_qls, SolveResult, SolverConfig, Status};
use qline::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlineStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    DimensionMismatch = 4,
    NumericFailure = 5,
    Panic = 6,
}

/// Outcome of a solve, mirrored from the library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlineSolveStatus {
    Converged = 0,
    MaxIterations = 1,
    TimeCap = 2,
    LineSearchFailure = 3,
    NumericFailure = 4,
}

impl From<Status> for QlineSolveStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Converged => QlineSolveStatus::Converged,
            Status::MaxIterations => QlineSolveStatus::MaxIterations,
            Status::TimeCap => QlineSolveStatus::TimeCap,
            Status::LineSearchFailure => QlineSolveStatus::LineSearchFailure,
            Status::NumericFailure => QlineSolveStatus::NumericFailure,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QlineOptions {
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    pub time_cap_seconds: f64,
    /// Initial dilation, used by the q-solver only.
    pub q0: f64,
    /// Schedule exponent, used by the q-solver only.
    pub gamma: u32,
}

/// Objective callback: `n` coordinates at `x`.
pub type QlineObjectiveFn = Option<unsafe extern "C" fn(x: *const f64, n: usize, user_data: *mut c_void) -> f64>;
/// Gradient callback: write `n` partial derivatives to `out`.
pub type QlineGradientFn =
    Option<unsafe extern "C" fn(x: *const f64, n: usize, out: *mut f64, user_data: *mut c_void)>;

/// Opaque problem handle.
pub struct QlineProblem {
    inner: Problem,
}

/// Opaque solve result handle.
pub struct QlineResult {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_for(err: &Error) -> QlineStatus {
    match err {
        Error::UnknownProblem(_) => QlineStatus::UnknownProblem,
        Error::DimensionMismatch { .. } => QlineStatus::DimensionMismatch,
        Error::NumericFailure { .. } | Error::NonFiniteMatrix => QlineStatus::NumericFailure,
        _ => QlineStatus::InvalidArgument,
    }
}

fn fail(code: QlineStatus, msg: impl Into<String>) -> QlineStatus {
    set_error(msg);
    code
}

fn from_error(err: Error) -> QlineStatus {
    fail(code_for(&err), err.to_string())
}

/// Run `body`, turning a panic into [`QlineStatus::Panic`].
fn guarded(body: impl FnOnce() -> QlineStatus) -> QlineStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(QlineStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn qline_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library defaults: tolerance 1e-5, 10000 iterations, 100 s, q0 0.9, gamma 1.
#[no_mangle]
pub extern "C" fn qline_options_default() -> QlineOptions {
    let c = SolverConfig::default();
    QlineOptions {
        grad_tolerance: c.grad_tolerance,
        max_iterations: c.max_iterations,
        time_cap_seconds: c.time_cap_seconds,
        q0: 0.9,
        gamma: 1,
    }
}

/// Look up a built-in problem such as `"branin"` or `"fc"`. `c` is read only
/// when `has_c` is non-zero and is required for the fc family.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qline_problem_builtin(
    name: *const c_char,
    c: f64,
    has_c: i32,
    out: *mut *mut QlineProblem,
) -> QlineStatus {
    guarded(|| {
        if name.is_null() || out.is_null() {
            return fail(QlineStatus::NullPointer, "name and out must be non-null");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(QlineStatus::InvalidArgument, "problem name is not UTF-8");
        };
        match by_name(name, (has_c != 0).then_some(c)) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(QlineProblem { inner: p }));
                QlineStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

struct UserData(*mut c_void);

// The caller promises the callbacks may be invoked from any thread.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

/// Wrap caller-provided callbacks as a problem of dimension `n`.
///
/// # Safety
/// Both callbacks must be safe to call with `n`-element buffers for as long
/// as the handle lives, from whichever thread runs the solver. `user_data` is
/// passed through untouched.
#[no_mangle]
pub unsafe extern "C" fn qline_problem_from_callbacks(
    n: usize,
    objective: QlineObjectiveFn,
    gradient: QlineGradientFn,
    user_data: *mut c_void,
    out: *mut *mut QlineProblem,
) -> QlineStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QlineStatus::NullPointer, "out must be non-null");
        }
        let (Some(f), Some(g)) = (objective, gradient) else {
            return fail(QlineStatus::NullPointer, "objective and gradient callbacks are required");
        };
        if n == 0 {
            return fail(QlineStatus::InvalidArgument, "dimension must be positive");
        }
        let fu = std::sync::Arc::new(UserData(user_data));
        let gu = fu.clone();
        let problem = Problem::new(
            "callback",
            n,
            move |x: &[f64]| unsafe { f(x.as_ptr(), x.len(), fu.0) },
            move |x: &[f64]| {
                let mut grad = vec![f64::NAN; x.len()];
                unsafe { g(x.as_ptr(), x.len(), grad.as_mut_ptr(), gu.0) };
                grad
            },
        );
        *out = Box::into_raw(Box::new(QlineProblem { inner: problem }));
        QlineStatus::Ok
    })
}

/// # Safety
/// `problem` must come from a `qline_problem_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qline_problem_free(problem: *mut QlineProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension of the problem, 0 for NULL.
///
/// # Safety
/// `problem` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qline_problem_dimension(problem: *const QlineProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dimension)
}

#[derive(Clone, Copy)]
enum Method {
    Q,
    Bfgs,
}

unsafe fn solve(
    method: Method,
    problem: *const QlineProblem,
    x0: *const f64,
    n: usize,
    options: *const QlineOptions,
    out: *mut *mut QlineResult,
) -> QlineStatus {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            return fail(QlineStatus::NullPointer, "problem must be non-null");
        };
        if x0.is_null() || out.is_null() {
            return fail(QlineStatus::NullPointer, "x0 and out must be non-null");
        }
        let p = &problem.inner;
        if n != p.dimension {
            return from_error(Error::DimensionMismatch {
                expected: p.dimension,
                got: n,
            });
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| qline_options_default());
        let config = SolverConfig {
            grad_tolerance: opts.grad_tolerance,
            max_iterations: opts.max_iterations,
            time_cap_seconds: opts.time_cap_seconds,
            ..Default::default()
        };
        if let Err(e) = config.validate() {
            return from_error(e);
        }
        let x0 = slice::from_raw_parts(x0, n);
        let result = match method {
            Method::Q => match QSchedule::new(opts.q0, opts.gamma) {
                Ok(s) => solve_qls(p, x0, &config, s),
                Err(e) => return from_error(e),
            },
            Method::Bfgs => solve_bfgs(p, x0, &config),
        };
        *out = Box::into_raw(Box::new(QlineResult { inner: result }));
        QlineStatus::Ok
    })
}

/// Minimize with the q-Newton line search. `options` may be NULL for defaults.
/// A solver that stops without converging still returns `QLINE_STATUS_OK`;
/// inspect the result's status.
///
/// # Safety
/// `x0` must point to `n` doubles; `problem` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qline_solve_qls(
    problem: *const QlineProblem,
    x0: *const f64,
    n: usize,
    options: *const QlineOptions,
    out: *mut *mut QlineResult,
) -> QlineStatus {
    solve(Method::Q, problem, x0, n, options, out)
}

/// Minimize with BFGS. Same contract as [`qline_solve_qls`].
///
/// # Safety
/// See [`qline_solve_qls`].
#[no_mangle]
pub unsafe extern "C" fn qline_solve_bfgs(
    problem: *const QlineProblem,
    x0: *const f64,
    n: usize,
    options: *const QlineOptions,
    out: *mut *mut QlineResult,
) -> QlineStatus {
    solve(Method::Bfgs, problem, x0, n, options, out)
}

/// # Safety
/// `result` must come from a solve call or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qline_result_free(result: *mut QlineResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qline_result_status(result: *const QlineResult) -> QlineSolveStatus {
    QlineSolveStatus::from((*result).inner.status)
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qline_result_iterations(result: *const QlineResult) -> usize {
    (*result).inner.iterations
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qline_result_objective(result: *const QlineResult) -> f64 {
    (*result).inner.f_final
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qline_result_grad_norm(result: *const QlineResult) -> f64 {
    (*result).inner.grad_norm
}

/// Copy the final point into `out`, which holds `len` doubles.
///
/// # Safety
/// `result` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qline_result_x(result: *const QlineResult, out: *mut f64, len: usize) -> QlineStatus {
    guarded(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(QlineStatus::NullPointer, "result and out must be non-null");
        };
        let x = &r.inner.x_final;
        if len != x.len() {
            return from_error(Error::DimensionMismatch {
                expected: x.len(),
                got: len,
            });
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(x);
        QlineStatus::Ok
    })
}

/// Positive definite modification of the symmetric `n x n` row-major matrix
/// `a`: every block eigenvalue of its LDL^T factorization is lifted to at
/// least `delta`. The modified matrix is written to `out` (row-major).
///
/// # Safety
/// `a` and `out` must each point to `n * n` doubles; they may not overlap.
#[no_mangle]
pub unsafe extern "C" fn qline_psd_modify(a: *const f64, n: usize, delta: f64, out: *mut f64) -> QlineStatus {
    guarded(|| {
        if a.is_null() || out.is_null() {
            return fail(QlineStatus::NullPointer, "a and out must be non-null");
        }
        let Some(len) = n.checked_mul(n) else {
            return fail(QlineStatus::InvalidArgument, "dimension overflows");
        };
        let m = DMatrix::from_row_slice(n, n, slice::from_raw_parts(a, len));
        match psd_modify(&m, delta) {
            Ok(pm) => {
                let dst = slice::from_raw_parts_mut(out, len);
                for i in 0..n {
                    for j in 0..n {
                        dst[i * n + j] = pm.modified_matrix[(i, j)];
                    }
                }
                QlineStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
