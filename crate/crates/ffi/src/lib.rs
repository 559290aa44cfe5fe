//! C ABI for the strata toolkit. All functions are panic-safe, report
//! failures through [`StrataStatus`], and keep a thread-local message
//! readable via [`strata_last_error`]. Matrices cross the boundary as
//! row-major `n * n` buffers with n in {2, 3}.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use strata_core::experiments::{
    run_cell_sweep, run_pipeline, run_scaling, run_weak_convergence, ExperimentConfig,
    ExperimentKind,
};
use strata_core::geometry::{midsection, phase, LayerConfig, Phase};
use strata_core::homog::{
    cell_minimize, svk, w_hom_convex, CellDiscretization, EnergyDensity, SvkParams,
};
use strata_core::mat::{dist_so, f_lambda, minors, minors_len, procrustes_rotation, SquareMatrix};
use strata_core::Error;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg.into());
}

/// Status codes of every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrataStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotInAdmissibleSet = 2,
    NotARotation = 3,
    ConfigError = 4,
    NonConvergence = 5,
    IoError = 6,
    Panicked = 7,
}

fn status_of(err: &Error) -> StrataStatus {
    match err {
        Error::NotInAdmissibleSet(_) => StrataStatus::NotInAdmissibleSet,
        Error::NotARotation(_) => StrataStatus::NotARotation,
        Error::Config { .. } => StrataStatus::ConfigError,
        Error::NonConvergence(_) => StrataStatus::NonConvergence,
        Error::Io(_) => StrataStatus::IoError,
        _ => StrataStatus::InvalidArgument,
    }
}

fn guarded<F: FnOnce() -> StrataStatus>(f: F) -> StrataStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            StrataStatus::Panicked
        }
    }
}

/// # Safety
/// `entries` must point to `n * n` readable doubles.
unsafe fn read_matrix(n: usize, entries: *const f64) -> Option<SquareMatrix> {
    if !(2..=3).contains(&n) || entries.is_null() {
        set_error("matrix pointer null or dimension not in {2, 3}");
        return None;
    }
    let slice = unsafe { std::slice::from_raw_parts(entries, n * n) };
    Some(SquareMatrix::from_rows(n, slice))
}

unsafe fn write_matrix(m: &SquareMatrix, out: *mut f64) {
    let values = m.row_major();
    unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
}

/// Library version string (static, never freed).
#[no_mangle]
pub extern "C" fn strata_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message into `buf` (truncated to `len - 1` bytes,
/// NUL-terminated) and returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn strata_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Frobenius distance of a row-major matrix to SO(n).
///
/// # Safety
/// `entries` must point to `n * n` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn strata_dist_so(
    n: usize,
    entries: *const f64,
    out: *mut f64,
) -> StrataStatus {
    guarded(|| {
        let Some(m) = (unsafe { read_matrix(n, entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return StrataStatus::InvalidArgument;
        }
        unsafe { *out = dist_so(&m) };
        StrataStatus::Ok
    })
}

/// Nearest rotation in Frobenius norm; `degenerate_out` reports a
/// non-unique minimizer.
///
/// # Safety
/// `entries` must point to `n * n` doubles, `rotation_out` to `n * n`
/// writable doubles, `degenerate_out` to one writable bool.
#[no_mangle]
pub unsafe extern "C" fn strata_procrustes(
    n: usize,
    entries: *const f64,
    rotation_out: *mut f64,
    degenerate_out: *mut bool,
) -> StrataStatus {
    guarded(|| {
        let Some(m) = (unsafe { read_matrix(n, entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        if rotation_out.is_null() || degenerate_out.is_null() {
            set_error("null output pointer");
            return StrataStatus::InvalidArgument;
        }
        let (rot, flag) = procrustes_rotation(&m);
        unsafe {
            write_matrix(rot.matrix(), rotation_out);
            *degenerate_out = flag;
        }
        StrataStatus::Ok
    })
}

/// The soft-phase compensating map `F_lambda` of an admissible matrix.
///
/// # Safety
/// `entries` must point to `n * n` doubles, `out` to `n * n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn strata_f_lambda(
    n: usize,
    entries: *const f64,
    lambda: f64,
    out: *mut f64,
) -> StrataStatus {
    guarded(|| {
        let Some(m) = (unsafe { read_matrix(n, entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        if out.is_null() || !(lambda > 0.0 && lambda <= 1.0) {
            set_error("null output pointer or lambda outside (0, 1]");
            return StrataStatus::InvalidArgument;
        }
        match f_lambda(&m, lambda) {
            Ok(fl) => {
                unsafe { write_matrix(&fl, out) };
                StrataStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// All minors in the library order (length 5 at n = 2, 19 at n = 3).
///
/// # Safety
/// `entries` must point to `n * n` doubles; `out` to `out_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn strata_minors(
    n: usize,
    entries: *const f64,
    out: *mut f64,
    out_len: usize,
) -> StrataStatus {
    guarded(|| {
        let Some(m) = (unsafe { read_matrix(n, entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        let needed = minors_len(n);
        if out.is_null() || out_len < needed {
            set_error(format!("output buffer must hold {needed} doubles"));
            return StrataStatus::InvalidArgument;
        }
        let mv = minors(&m);
        unsafe {
            std::ptr::copy_nonoverlapping(mv.components().as_ptr(), out, needed);
        }
        StrataStatus::Ok
    })
}

/// Midsection of the closest stiff layer above `t`; NaN on invalid layering.
#[no_mangle]
pub extern "C" fn strata_midsection(t: f64, lambda: f64, eps: f64) -> f64 {
    match LayerConfig::new(lambda, eps) {
        Ok(cfg) => midsection(t, &cfg),
        Err(_) => f64::NAN,
    }
}

/// Phase of the coordinate `xn`: 1 soft, 0 stiff, -1 invalid layering.
#[no_mangle]
pub extern "C" fn strata_phase(xn: f64, lambda: f64, eps: f64) -> i32 {
    match LayerConfig::new(lambda, eps) {
        Ok(cfg) => match phase(xn, &cfg) {
            Phase::Soft => 1,
            Phase::Stiff => 0,
        },
        Err(_) => -1,
    }
}

/// Saint Venant-Kirchhoff energy of a row-major matrix.
///
/// # Safety
/// `entries` must point to `n * n` doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn strata_svk(
    n: usize,
    entries: *const f64,
    lam: f64,
    mu: f64,
    out: *mut f64,
) -> StrataStatus {
    guarded(|| {
        let Some(m) = (unsafe { read_matrix(n, entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return StrataStatus::InvalidArgument;
        }
        match SvkParams::new(lam, mu) {
            Ok(params) => {
                unsafe { *out = svk(&m, &params) };
                StrataStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                StrataStatus::InvalidArgument
            }
        }
    })
}

/// Opaque energy-density handle.
pub struct StrataDensity {
    inner: EnergyDensity,
}

/// `W(F) = |F|^2` handle; free with [`strata_density_free`]. Null on error.
#[no_mangle]
pub extern "C" fn strata_density_frobenius(n: usize) -> *mut StrataDensity {
    if !(2..=3).contains(&n) {
        set_error("dimension must be 2 or 3");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(StrataDensity {
        inner: EnergyDensity::frobenius_squared(n),
    }))
}

/// Saint Venant-Kirchhoff handle; free with [`strata_density_free`].
#[no_mangle]
pub extern "C" fn strata_density_svk(n: usize, lam: f64, mu: f64) -> *mut StrataDensity {
    if !(2..=3).contains(&n) {
        set_error("dimension must be 2 or 3");
        return std::ptr::null_mut();
    }
    match SvkParams::new(lam, mu) {
        Ok(params) => Box::into_raw(Box::new(StrataDensity {
            inner: EnergyDensity::svk(n, params),
        })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Releases a density handle (null is a no-op).
///
/// # Safety
/// `density` must be a pointer returned by a `strata_density_*` constructor,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn strata_density_free(density: *mut StrataDensity) {
    if !density.is_null() {
        drop(unsafe { Box::from_raw(density) });
    }
}

/// Closed-form homogenized value `lambda W(F_lambda)` of a convex density.
///
/// # Safety
/// `density` must be a live handle; `f_entries` n*n doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn strata_w_hom_convex(
    density: *const StrataDensity,
    f_entries: *const f64,
    lambda: f64,
    out: *mut f64,
) -> StrataStatus {
    guarded(|| {
        if density.is_null() || out.is_null() {
            set_error("null handle or output pointer");
            return StrataStatus::InvalidArgument;
        }
        let w = unsafe { &(*density).inner };
        let Some(m) = (unsafe { read_matrix(w.n(), f_entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        match w_hom_convex(&m, w, lambda) {
            Ok(v) => {
                unsafe { *out = v };
                StrataStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Cell-problem value of the homogenized density by seeded multistart
/// minimization over zero-boundary perturbations of the soft cell.
///
/// # Safety
/// `density` must be a live handle; `f_entries` n*n doubles; the three
/// output pointers writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn strata_cell_minimize(
    density: *const StrataDensity,
    f_entries: *const f64,
    lambda: f64,
    m: usize,
    m_n: usize,
    gauss: usize,
    restarts: usize,
    seed: u64,
    value_out: *mut f64,
    norm_out: *mut f64,
    converged_out: *mut bool,
) -> StrataStatus {
    guarded(|| {
        if density.is_null() || value_out.is_null() || norm_out.is_null() || converged_out.is_null()
        {
            set_error("null handle or output pointer");
            return StrataStatus::InvalidArgument;
        }
        let w = unsafe { &(*density).inner };
        let Some(fm) = (unsafe { read_matrix(w.n(), f_entries) }) else {
            return StrataStatus::InvalidArgument;
        };
        let disc = match CellDiscretization::new(m, m_n, gauss) {
            Ok(d) => d.with_restarts(restarts).with_seed(seed),
            Err(e) => {
                set_error(e.to_string());
                return StrataStatus::InvalidArgument;
            }
        };
        match cell_minimize(&fm, w, lambda, &disc) {
            Ok(outcome) => {
                unsafe {
                    *value_out = outcome.value;
                    *norm_out = outcome.perturbation_norm;
                    *converged_out = outcome.converged;
                }
                StrataStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Runs a batch experiment from a config file and writes its CSV, exactly
/// like the `strata` command-line tool. `kind` is one of `scaling`,
/// `weakconv`, `pipeline`, `cellsweep`; `seed >= 0` overrides the config.
///
/// # Safety
/// `kind`, `config_path`, `out_path` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn strata_run_experiment(
    kind: *const c_char,
    config_path: *const c_char,
    out_path: *const c_char,
    seed: i64,
) -> StrataStatus {
    guarded(|| {
        let parse_str = |p: *const c_char, what: &str| -> Option<String> {
            if p.is_null() {
                set_error(format!("null {what}"));
                return None;
            }
            match unsafe { CStr::from_ptr(p) }.to_str() {
                Ok(s) => Some(s.to_string()),
                Err(_) => {
                    set_error(format!("{what} is not valid UTF-8"));
                    None
                }
            }
        };
        let (Some(kind), Some(config_path), Some(out_path)) = (
            parse_str(kind, "experiment kind"),
            parse_str(config_path, "config path"),
            parse_str(out_path, "output path"),
        ) else {
            return StrataStatus::InvalidArgument;
        };
        let kind = match kind.as_str() {
            "scaling" => ExperimentKind::Scaling,
            "weakconv" => ExperimentKind::WeakConv,
            "pipeline" => ExperimentKind::Pipeline,
            "cellsweep" => ExperimentKind::CellSweep,
            other => {
                set_error(format!("unknown experiment kind `{other}`"));
                return StrataStatus::InvalidArgument;
            }
        };
        let run = || -> Result<bool, Error> {
            let text = std::fs::read_to_string(&config_path)?;
            let mut cfg = ExperimentConfig::parse(&text, kind)?;
            if seed >= 0 {
                cfg.seed = seed as u64;
            }
            let (csv, converged) = match kind {
                ExperimentKind::Scaling => (run_scaling(&cfg)?.csv, true),
                ExperimentKind::WeakConv => (run_weak_convergence(&cfg)?, true),
                ExperimentKind::Pipeline => (run_pipeline(&cfg)?, true),
                ExperimentKind::CellSweep => {
                    let out = run_cell_sweep(&cfg)?;
                    (out.csv, out.all_converged)
                }
            };
            let mut file = std::fs::File::create(&out_path)?;
            csv.write_to(&mut file)?;
            Ok(converged)
        };
        match run() {
            Ok(true) => StrataStatus::Ok,
            Ok(false) => {
                set_error("numerical non-convergence; partial results written".to_string());
                StrataStatus::NonConvergence
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}
