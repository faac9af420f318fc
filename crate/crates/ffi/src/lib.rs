//! C ABI over the `branchsite` library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible function returns one of the
//! `BS_*` status codes; on failure the message is available from
//! [`bs_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use branchsite::app::{load_project, run_pipeline};
use branchsite::mclp::{improve_swap, solve_exact, solve_greedy, ExactOptions, InstanceFile, MclpInstance, MclpSolution};
use branchsite::weights::{consistency_ratio, principal_weights, ComparisonMatrix, RandomIndex};
use branchsite::Error;

pub const BS_OK: i32 = 0;
/// Null pointer, bad UTF-8 or an out-of-range argument.
pub const BS_ERR_ARGUMENT: i32 = 1;
/// Invalid input data or configuration (CLI exit code 2).
pub const BS_ERR_VALIDATION: i32 = 2;
/// The exact solver refused the instance (CLI exit code 3).
pub const BS_ERR_SOLVER: i32 = 3;
/// File system failure (CLI exit code 4).
pub const BS_ERR_IO: i32 = 4;
/// A Rust panic was caught at the boundary.
pub const BS_ERR_PANIC: i32 = 5;

pub const BS_METHOD_EXACT: i32 = 0;
pub const BS_METHOD_GREEDY: i32 = 1;
pub const BS_METHOD_GREEDY_SWAP: i32 = 2;

/// Opaque MCLP instance.
pub struct BsInstance(MclpInstance);

/// Opaque MCLP solution.
pub struct BsSolution(MclpSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("NULs removed")));
}

fn code_of(e: &Error) -> i32 {
    match e.exit_code() {
        3 => BS_ERR_SOLVER,
        4 => BS_ERR_IO,
        _ => BS_ERR_VALIDATION,
    }
}

enum Fail {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, mapping errors and panics onto status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BS_OK,
        Ok(Err(Fail::Arg(m))) => {
            set_error(m);
            BS_ERR_ARGUMENT
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            BS_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Arg(format!("`{name}` is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives this call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail::Arg(format!("`{name}` is not UTF-8")))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Arg(format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses an instance from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_instance_from_json(json: *const c_char, out: *mut *mut BsInstance) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let text = unsafe { str_arg(json, "json") }?;
        let inst = InstanceFile::from_json(text)?.into_instance()?;
        unsafe { *out = Box::into_raw(Box::new(BsInstance(inst))) };
        Ok(())
    })
}

/// # Safety
/// `inst` must come from [`bs_instance_from_json`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bs_instance_free(inst: *mut BsInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Number of demand areas and candidate sites.
///
/// # Safety
/// `inst` must be a live handle; `areas` and `sites` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_instance_counts(inst: *const BsInstance, areas: *mut usize, sites: *mut usize) -> i32 {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(areas, "areas")?;
        non_null(sites, "sites")?;
        let i = unsafe { &(*inst).0 };
        unsafe {
            *areas = i.areas().len();
            *sites = i.sites().len();
        }
        Ok(())
    })
}

/// Opens `p` sites with the given `BS_METHOD_*`. Set `allow_large` to run the
/// exact solver above its default size cap.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_solve(
    inst: *const BsInstance,
    p: usize,
    method: i32,
    allow_large: bool,
    out: *mut *mut BsSolution,
) -> i32 {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(out, "out")?;
        let i = unsafe { &(*inst).0 };
        let sol = match method {
            BS_METHOD_EXACT => solve_exact(i, p, ExactOptions { allow_large, ..Default::default() })?,
            BS_METHOD_GREEDY => solve_greedy(i, p)?,
            BS_METHOD_GREEDY_SWAP => improve_swap(i, &solve_greedy(i, p)?),
            other => return Err(Fail::Arg(format!("unknown method {other}"))),
        };
        unsafe { *out = Box::into_raw(Box::new(BsSolution(sol))) };
        Ok(())
    })
}

/// # Safety
/// `sol` must come from [`bs_solve`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bs_solution_free(sol: *mut BsSolution) {
    if !sol.is_null() {
        drop(unsafe { Box::from_raw(sol) });
    }
}

/// Covered population and covering percentage.
///
/// # Safety
/// `sol` must be a live handle; `z` and `pct` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_solution_objective(sol: *const BsSolution, z: *mut u64, pct: *mut f64) -> i32 {
    guard(|| {
        non_null(sol, "sol")?;
        non_null(z, "z")?;
        non_null(pct, "pct")?;
        let s = unsafe { &(*sol).0 };
        unsafe {
            *z = s.z;
            *pct = s.coverage_pct;
        }
        Ok(())
    })
}

/// Whole solution as JSON. Free the string with [`bs_string_free`].
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_solution_to_json(sol: *const BsSolution, out: *mut *mut c_char) -> i32 {
    guard(|| {
        non_null(sol, "sol")?;
        non_null(out, "out")?;
        let text = serde_json::to_string(unsafe { &(*sol).0 }).expect("solution serializes");
        let c = CString::new(text).map_err(|e| Fail::Arg(e.to_string()))?;
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Principal-eigenvector weights and consistency ratio of an `n` x `n`
/// row-major comparison matrix. `weights` receives `n` values.
///
/// # Safety
/// `data` must hold `n * n` doubles; `weights` must hold `n`; `cr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_matrix_weights(data: *const f64, n: usize, weights: *mut f64, cr: *mut f64) -> i32 {
    guard(|| {
        non_null(data, "data")?;
        non_null(weights, "weights")?;
        non_null(cr, "cr")?;
        let len = n.checked_mul(n).ok_or_else(|| Fail::Arg("n is too large".into()))?;
        let flat = unsafe { std::slice::from_raw_parts(data, len) };
        let rows = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let m = ComparisonMatrix::new(rows)?;
        let w = principal_weights(&m)?;
        let ratio = consistency_ratio(&m, &RandomIndex::default())?;
        let dst = unsafe { std::slice::from_raw_parts_mut(weights, n) };
        dst.copy_from_slice(w.as_slice());
        unsafe { *cr = ratio };
        Ok(())
    })
}

/// Loads a project file and runs the whole pipeline into `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bs_run_pipeline(config_path: *const c_char, out_dir: *const c_char) -> i32 {
    guard(|| {
        let config = unsafe { str_arg(config_path, "config_path") }?;
        let out = unsafe { str_arg(out_dir, "out_dir") }?;
        let project = load_project(Path::new(config))?;
        run_pipeline(&project, Path::new(out))?;
        Ok(())
    })
}
