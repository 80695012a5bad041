//! C ABI over the dyadic laboratory.
//!
//! Every fallible call returns a [`DbStatus`] and writes its result through
//! an out-pointer. On failure `db_last_error` describes the problem for the
//! calling thread. Handles are opaque; free each with its `_free` function.
//! Strings returned by the library are freed with [`db_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dyadic_bump::bumps::{ap_constant, bump_separated_a, bump_separated_b};
use dyadic_bump::config::ExperimentConfig;
use dyadic_bump::hilbert::hilbert_apply;
use dyadic_bump::mesh::{DyadicCube, DyadicMesh, GridFunction, Weight};
use dyadic_bump::orlicz::luxemburg_norm;
use dyadic_bump::shifts::{random_shift, testing_constant, weighted_norm_estimate, HaarShift, ShiftMode};
use dyadic_bump::suites::{run_suite, Suite};
use dyadic_bump::weights::generate_weight;
use dyadic_bump::young::YoungFunction;
use dyadic_bump::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad string, mesh, cube, spec or weight.
    InvalidArgument = 2,
    /// Argument outside the mathematical domain of the operation.
    Domain = 3,
    MeshMismatch = 4,
    /// Configuration text could not be parsed or validated.
    Config = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Shift coefficient mode for [`db_shift_random`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbShiftMode {
    /// Coefficients projected to mean zero.
    Cancellative = 0,
    Positive = 1,
}

/// A grid function on a dyadic mesh.
pub struct DbGrid(GridFunction);

/// A Young function.
pub struct DbYoung(YoungFunction);

/// A Haar shift kernel.
pub struct DbShift(HaarShift);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DbStatus {
    match e {
        Error::Domain(_) | Error::NotPositive => DbStatus::Domain,
        Error::MeshMismatch(_) => DbStatus::MeshMismatch,
        Error::Parse { .. } | Error::Config(_) => DbStatus::Config,
        Error::Io(_) => DbStatus::Io,
        _ => DbStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Run `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> DbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DbStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DbStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DbStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail::Lib(Error::Config(format!("{what} is not UTF-8"))))
}

fn weight(g: &DbGrid) -> Result<Weight, Fail> {
    Ok(Weight::new(g.0.clone())?)
}

fn cube(mesh: DyadicMesh, level: u32, index: usize) -> Result<DyadicCube, Fail> {
    if level > mesh.depth() || index >= mesh.cubes_at_level(level) {
        return Err(Fail::Lib(Error::ForeignCube(format!("level {level}, index {index}"))));
    }
    Ok(mesh.cube_at(level, index))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn db_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn db_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn db_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- grids ----

/// Grid of `len` cell values in row-major order on the `dim`-dimensional
/// mesh of depth `depth`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_grid_new(
    dim: u32,
    depth: u32,
    values: *const f64,
    len: usize,
    out: *mut *mut DbGrid,
) -> DbStatus {
    guard(|| {
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let mesh = DyadicMesh::new(dim, depth)?;
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let g = GridFunction::new(mesh, v)?;
        put(out, Box::into_raw(Box::new(DbGrid(g))), "out")
    })
}

/// Weight from a generator spec such as `cascade:0.5,7`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_grid_weight(dim: u32, depth: u32, spec: *const c_char, out: *mut *mut DbGrid) -> DbStatus {
    guard(|| {
        let mesh = DyadicMesh::new(dim, depth)?;
        let w = generate_weight(text(spec, "spec")?, mesh)?;
        put(out, Box::into_raw(Box::new(DbGrid(w.into_inner()))), "out")
    })
}

/// # Safety
/// `g` must be NULL or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn db_grid_free(g: *mut DbGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of cells, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn db_grid_len(g: *const DbGrid) -> usize {
    g.as_ref().map_or(0, |g| g.0.values().len())
}

/// Copy the cell values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn db_grid_values(g: *const DbGrid, buf: *mut f64, len: usize) -> DbStatus {
    guard(|| {
        let g = get(g, "grid")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let v = g.0.values();
        if len != v.len() {
            return Err(Fail::Lib(Error::Domain(format!("buffer holds {len} values, grid has {}", v.len()))));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, len);
        Ok(())
    })
}

// ---- Young functions ----

/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_young_parse(spec: *const c_char, out: *mut *mut DbYoung) -> DbStatus {
    guard(|| {
        let a = YoungFunction::parse(text(spec, "spec")?)?;
        put(out, Box::into_raw(Box::new(DbYoung(a))), "out")
    })
}

/// # Safety
/// `a` must be NULL or a live Young handle.
#[no_mangle]
pub unsafe extern "C" fn db_young_free(a: *mut DbYoung) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// # Safety
/// `a` must be a live Young handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_young_value(a: *const DbYoung, t: f64, out: *mut f64) -> DbStatus {
    guard(|| put(out, get(a, "young")?.0.eval(t)?, "out"))
}

/// # Safety
/// `a` must be a live Young handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_young_inverse(a: *const DbYoung, t: f64, out: *mut f64) -> DbStatus {
    guard(|| {
        if !(t >= 0.0) {
            return Err(Fail::Lib(Error::Domain(format!("inverse at {t}"))));
        }
        put(out, get(a, "young")?.0.inverse(t), "out")
    })
}

/// New handle for the complementary function.
///
/// # Safety
/// `a` must be a live Young handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_young_complement(a: *const DbYoung, out: *mut *mut DbYoung) -> DbStatus {
    guard(|| {
        let c = get(a, "young")?.0.complement();
        put(out, Box::into_raw(Box::new(DbYoung(c))), "out")
    })
}

/// Luxemburg average of `f` over the cube `(level, index)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_luxemburg_norm(
    f: *const DbGrid,
    a: *const DbYoung,
    level: u32,
    index: usize,
    out: *mut f64,
) -> DbStatus {
    guard(|| {
        let f = &get(f, "grid")?.0;
        let q = cube(f.mesh(), level, index)?;
        put(out, luxemburg_norm(f, &q, &get(a, "young")?.0)?, "out")
    })
}

// ---- bump constants ----

/// Which bump constant [`db_bump_constant`] computes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbBump {
    /// Two-weight A_p; the Young handle is ignored and may be NULL.
    Ap = 0,
    /// Bump on the σ side.
    SeparatedA = 1,
    /// Bump on the u side.
    SeparatedB = 2,
}

/// # Safety
/// Handles must be live (the Young handle may be NULL for `Ap`); `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn db_bump_constant(
    kind: DbBump,
    u: *const DbGrid,
    sigma: *const DbGrid,
    a: *const DbYoung,
    p: f64,
    out: *mut f64,
) -> DbStatus {
    guard(|| {
        let u = weight(get(u, "u")?)?;
        let sigma = weight(get(sigma, "sigma")?)?;
        let c = match kind {
            DbBump::Ap => ap_constant(&u, &sigma, p)?,
            DbBump::SeparatedA => bump_separated_a(&u, &sigma, &get(a, "young")?.0, p)?,
            DbBump::SeparatedB => bump_separated_b(&u, &sigma, &get(a, "young")?.0, p)?,
        };
        put(out, c.value, "out")
    })
}

// ---- shifts ----

/// Random shift of complexity `(m, n)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_shift_random(
    dim: u32,
    depth: u32,
    m: u32,
    n: u32,
    seed: u64,
    mode: DbShiftMode,
    out: *mut *mut DbShift,
) -> DbStatus {
    guard(|| {
        let mesh = DyadicMesh::new(dim, depth)?;
        let mode = match mode {
            DbShiftMode::Positive => ShiftMode::Positive,
            DbShiftMode::Cancellative => ShiftMode::Cancellative,
        };
        let s = random_shift(mesh, m, n, seed, mode)?;
        put(out, Box::into_raw(Box::new(DbShift(s))), "out")
    })
}

/// # Safety
/// `s` must be NULL or a live shift handle.
#[no_mangle]
pub unsafe extern "C" fn db_shift_free(s: *mut DbShift) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_shift_apply(s: *const DbShift, f: *const DbGrid, out: *mut *mut DbGrid) -> DbStatus {
    guard(|| {
        let g = get(s, "shift")?.0.apply(&get(f, "grid")?.0)?;
        put(out, Box::into_raw(Box::new(DbGrid(g))), "out")
    })
}

/// Norm of `f ↦ S(fσ)` from `L^p(σ)` to `L^p(u)`: exact for `p = 2`,
/// a lower bound otherwise.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_shift_weighted_norm(
    s: *const DbShift,
    u: *const DbGrid,
    sigma: *const DbGrid,
    p: f64,
    budget: usize,
    seed: u64,
    out: *mut f64,
) -> DbStatus {
    guard(|| {
        let u = weight(get(u, "u")?)?;
        let sigma = weight(get(sigma, "sigma")?)?;
        let est = weighted_norm_estimate(&get(s, "shift")?.0, &u, &sigma, p, budget, seed)?;
        put(out, est.lower_bound, "out")
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_shift_testing(
    s: *const DbShift,
    u: *const DbGrid,
    sigma: *const DbGrid,
    p: f64,
    out: *mut f64,
) -> DbStatus {
    guard(|| {
        let u = weight(get(u, "u")?)?;
        let sigma = weight(get(sigma, "sigma")?)?;
        put(out, testing_constant(&get(s, "shift")?.0, &u, &sigma, p)?.value, "out")
    })
}

// ---- Hilbert transform and suites ----

/// Truncated Hilbert transform of a one-dimensional grid.
///
/// # Safety
/// `f` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_hilbert_apply(f: *const DbGrid, eps: f64, out: *mut *mut DbGrid) -> DbStatus {
    guard(|| {
        let g = hilbert_apply(&get(f, "grid")?.0, eps)?;
        put(out, Box::into_raw(Box::new(DbGrid(g))), "out")
    })
}

/// Run a named suite and return its JSON report. `config_toml` may be NULL,
/// in which case the suite defaults are used with `seed`; otherwise `seed`
/// overrides the config's seed. `passed` (optional) receives 1 iff every
/// verdict passed.
///
/// # Safety
/// Strings must be NUL-terminated; `out_json` must be writable; the
/// returned string is freed with [`db_string_free`].
#[no_mangle]
pub unsafe extern "C" fn db_run_suite(
    suite: *const c_char,
    config_toml: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
    passed: *mut i32,
) -> DbStatus {
    guard(|| {
        let s: Suite = text(suite, "suite")?.parse()?;
        let mut cfg = if config_toml.is_null() {
            ExperimentConfig::with_seed(seed)
        } else {
            ExperimentConfig::from_toml_str(text(config_toml, "config")?)?
        };
        cfg.seed = seed;
        let report = run_suite(s, &cfg)?;
        let json = CString::new(report.to_json()?).map_err(|e| Error::Config(e.to_string()))?;
        if !passed.is_null() {
            passed.write(i32::from(report.passed()));
        }
        put(out_json, json.into_raw(), "out_json")
    })
}
