//! C ABI over `lumpmg`: opaque problem and solver handles, integer status
//! codes and a thread-local last-error message.
//!
//! Every function returns `LUMPMG_OK` on success. Handles are created by
//! `*_new` functions and released by the matching `*_free`; passing a
//! handle after freeing it is undefined behaviour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use lumpmg::assembly::DiscreteProblem;
use lumpmg::block::{BlockOperator, Variant};
use lumpmg::harness::config::{ExampleId, MethodConfig, OneOrMany, ProblemConfig, MAX_LEVEL};
use lumpmg::harness::run::CellSolver;
use lumpmg::mesh::BcSpec;
use lumpmg::multigrid::LevelStack;
use lumpmg::Error;

pub type LumpmgStatus = i32;

pub const LUMPMG_OK: LumpmgStatus = 0;
pub const LUMPMG_ERR_NULL: LumpmgStatus = 1;
pub const LUMPMG_ERR_INVALID_ARGUMENT: LumpmgStatus = 2;
pub const LUMPMG_ERR_CONFIG: LumpmgStatus = 3;
pub const LUMPMG_ERR_DIMENSION: LumpmgStatus = 4;
pub const LUMPMG_ERR_NUMERICAL: LumpmgStatus = 5;
pub const LUMPMG_ERR_PANIC: LumpmgStatus = 6;

pub const LUMPMG_BC_ALL_DIRICHLET: i32 = 0;
pub const LUMPMG_BC_MIXED_CORNER: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> LumpmgStatus {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::CoefficientMismatch | Error::UnknownTable(_) => LUMPMG_ERR_CONFIG,
        Error::DimensionMismatch { .. } | Error::DenseCapExceeded { .. } => LUMPMG_ERR_DIMENSION,
        Error::InvalidLevels { .. } | Error::ZeroTau => LUMPMG_ERR_INVALID_ARGUMENT,
        _ => LUMPMG_ERR_NUMERICAL,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LumpmgStatus, String)>) -> LumpmgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LUMPMG_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            LUMPMG_ERR_PANIC
        }
    }
}

fn lib_err(e: Error) -> (LumpmgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LumpmgStatus, String) {
    (LUMPMG_ERR_NULL, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LumpmgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LumpmgStatus::from(LUMPMG_ERR_INVALID_ARGUMENT), format!("{what} is not UTF-8")))
}

/// One assembled `(level, tau)` system with its multigrid level stack.
pub struct LumpmgProblem {
    stack: Arc<LevelStack>,
    problem: DiscreteProblem,
}

pub struct LumpmgSolver {
    cell: CellSolver,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LumpmgSolveInfo {
    pub iterations: usize,
    /// 1 if the relative residual dropped below the tolerance.
    pub converged: i32,
    pub conv_factor: f64,
    pub relative_residual: f64,
    pub wall_ms: f64,
}

fn build_problem(cfg: ProblemConfig) -> Result<LumpmgProblem, (LumpmgStatus, String)> {
    cfg.validate().map_err(lib_err)?;
    let (levels, taus) = (cfg.level.values(), cfg.tau.values());
    if levels.len() != 1 || taus.len() != 1 {
        return Err((LUMPMG_ERR_CONFIG, "a problem handle takes a single level and tau".into()));
    }
    let stack = Arc::new(LevelStack::build(levels[0], cfg.coarse_level, &cfg.spec()).map_err(lib_err)?);
    let problem = DiscreteProblem::new(stack.finest().clone(), taus[0]);
    Ok(LumpmgProblem { stack, problem })
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Builds the L-shape problem of Example `example` (1 or 2) with boundary
/// conditions `bc`, finest level `level` (h = 2^-level) and step `tau`.
/// DOFs are numbered hierarchically; use `lumpmg_problem_from_json` with
/// `"ordering"` to choose the Gauss-Seidel sweep order.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_new(
    example: i32,
    bc: i32,
    level: u32,
    tau: f64,
    out: *mut *mut LumpmgProblem,
) -> LumpmgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let example = match example {
            1 => ExampleId::One,
            2 => ExampleId::Two,
            _ => return Err((LUMPMG_ERR_INVALID_ARGUMENT, format!("example must be 1 or 2, got {example}"))),
        };
        let bc = match bc {
            LUMPMG_BC_ALL_DIRICHLET => BcSpec::AllDirichlet,
            LUMPMG_BC_MIXED_CORNER => BcSpec::MixedCorner,
            _ => return Err((LUMPMG_ERR_INVALID_ARGUMENT, format!("unknown bc {bc}"))),
        };
        let cfg = ProblemConfig {
            example,
            bc,
            tau: OneOrMany::One(tau),
            level: OneOrMany::One(level.min(MAX_LEVEL + 1)),
            coarse_level: 1,
            ordering: None,
            coefficients: None,
        };
        store(out, build_problem(cfg)?);
        Ok(())
    })
}

/// Builds a problem from the JSON `problem` object of an experiment config
/// (single level and tau).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_from_json(json: *const c_char, out: *mut *mut LumpmgProblem) -> LumpmgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| (LUMPMG_ERR_CONFIG, e.to_string()))?;
        store(out, build_problem(cfg)?);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `lumpmg_problem_new`.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_free(p: *mut LumpmgProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Unknowns per field; the block system has twice as many.
///
/// # Safety
/// `p` must be a valid problem handle.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_dofs(p: *const LumpmgProblem, out: *mut usize) -> LumpmgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.problem.n();
        Ok(())
    })
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], (LumpmgStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err((LUMPMG_ERR_DIMENSION, format!("{what} has length {len}, expected {want}")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, want: usize, what: &str) -> Result<&'a [f64], (LumpmgStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err((LUMPMG_ERR_DIMENSION, format!("{what} has length {len}, expected {want}")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Writes the problem's right-hand side `[0; M u_old]` (length `2n`).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_rhs(p: *const LumpmgProblem, out: *mut f64, len: usize) -> LumpmgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let dst = slice_mut(out, len, 2 * p.problem.n(), "out")?;
        dst.copy_from_slice(&p.problem.rhs());
        Ok(())
    })
}

/// `y = A x` for the block system, vectors stored as `[v; u]`.
///
/// # Safety
/// `x` and `y` must point to `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_problem_apply(
    p: *const LumpmgProblem,
    x: *const f64,
    y: *mut f64,
    len: usize,
) -> LumpmgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let n2 = 2 * p.problem.n();
        let x = slice(x, len, n2, "x")?;
        let y = slice_mut(y, len, n2, "y")?;
        BlockOperator::new(p.problem.clone(), Variant::A).apply_into(x, y);
        Ok(())
    })
}

/// Sets up a solver from the JSON `method` object of an experiment config,
/// e.g. `{"solver": "gmres", "precond": "B", "inner": "mg"}`.
///
/// # Safety
/// `p` must be a valid problem handle, `json` a NUL-terminated string and
/// `out` a valid pointer. The solver does not borrow `p`.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_solver_new(
    p: *const LumpmgProblem,
    method_json: *const c_char,
    out: *mut *mut LumpmgSolver,
) -> LumpmgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(method_json, "method_json")?;
        let cfg: MethodConfig = serde_json::from_str(text).map_err(|e| (LUMPMG_ERR_CONFIG, e.to_string()))?;
        let method = cfg.resolve().map_err(lib_err)?;
        let cell = CellSolver::new(&p.stack, p.problem.tau(), &method).map_err(lib_err)?;
        store(out, LumpmgSolver { cell });
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from `lumpmg_solver_new`.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_solver_free(s: *mut LumpmgSolver) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Solves `A x = rhs` to relative residual `tol` from a random initial
/// guess drawn from `seed`. Non-convergence is reported in `info`, not as
/// an error.
///
/// # Safety
/// `rhs` and `x` must point to `len` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn lumpmg_solver_solve(
    s: *mut LumpmgSolver,
    rhs: *const f64,
    x: *mut f64,
    len: usize,
    tol: f64,
    maxit: usize,
    seed: u64,
    info: *mut LumpmgSolveInfo,
) -> LumpmgStatus {
    guard(|| {
        let s = s.as_mut().ok_or_else(|| null("solver"))?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err((LUMPMG_ERR_INVALID_ARGUMENT, format!("tol must be positive, got {tol}")));
        }
        let n2 = 2 * s.cell.problem().n();
        let rhs = slice(rhs, len, n2, "rhs")?;
        let x = slice_mut(x, len, n2, "x")?;
        let (sol, report) = s.cell.solve_rhs(rhs, tol, maxit, seed).map_err(lib_err)?;
        x.copy_from_slice(&sol);
        if let Some(info) = info.as_mut() {
            let r0 = report.residuals.first().copied().unwrap_or(0.0);
            let rk = report.residuals.last().copied().unwrap_or(0.0);
            *info = LumpmgSolveInfo {
                iterations: report.iterations,
                converged: i32::from(report.converged),
                conv_factor: report.conv_factor,
                relative_residual: if r0 > 0.0 { rk / r0 } else { 0.0 },
                wall_ms: report.wall_ms,
            };
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lumpmg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lumpmg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
