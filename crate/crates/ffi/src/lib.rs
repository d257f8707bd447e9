//! C ABI over `projlab`.
//!
//! Objects are opaque handles released with their `*_free` function. Every
//! fallible call returns a [`PlStatus`]; on failure the message is available
//! from [`pl_last_error_message`] on the same thread. Matrices and vector
//! lists cross the boundary as flat row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use projlab::cli::{self, ExperimentConfig};
use projlab::io::SpaceSpec;
use projlab::minproj::{minimal_projection, MinProjOptions};
use projlab::projections::Projection;
use projlab::spaces::NormOptions;
use projlab::{Error, Matrix, NormedSpace, Subspace, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Certification = 5,
    Io = 6,
    Panic = 7,
}

pub struct PlSpace(Arc<NormedSpace>);
pub struct PlSubspace(Subspace);
pub struct PlProjection(Projection);
pub struct PlReport(cli::Report);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidNorm(_)
        | Error::InvalidSubspace(_)
        | Error::Inclusion(_)
        | Error::NotDirectSum(_)
        | Error::Precondition(_) => PlStatus::InvalidArgument,
        Error::Parse(_) => PlStatus::Parse,
        Error::Io(_) => PlStatus::Io,
        Error::Certification { .. } | Error::SumCondition { .. } => PlStatus::Certification,
        _ => PlStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PlStatus>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PlStatus::Panic
        }
    }
}

fn fail(e: Error) -> PlStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn invalid(msg: &str) -> PlStatus {
    set_error(msg.into());
    PlStatus::InvalidArgument
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, PlStatus> {
    if p.is_null() {
        set_error("null handle".into());
        return Err(PlStatus::NullPointer);
    }
    Ok(&*p)
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], PlStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error("null data pointer".into());
        return Err(PlStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, PlStatus> {
    if p.is_null() {
        set_error("null string".into());
        return Err(PlStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not UTF-8"))
}

unsafe fn store<T>(out: *mut *mut T, v: T) -> Result<(), PlStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(PlStatus::NullPointer);
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is NULL or a string returned by `pl_report_json`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// spaces

/// `l_p^dim`; pass `INFINITY` for the max norm.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_lp(dim: usize, p: f64, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let s = NormedSpace::lp(dim, p).map_err(fail)?;
        store(out, PlSpace(Arc::new(s)))
    })
}

/// A space from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_from_json(json: *const c_char, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| {
        let spec: SpaceSpec = serde_json::from_str(text(json)?).map_err(|e| fail(Error::Parse(e.to_string())))?;
        let s = spec.build().map_err(fail)?;
        store(out, PlSpace(Arc::new(s)))
    })
}

/// # Safety
/// `s` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_space_free(s: *mut PlSpace) {
    free(s)
}

/// Dimension, or 0 for NULL.
///
/// # Safety
/// `s` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_space_dim(s: *const PlSpace) -> usize {
    s.as_ref().map_or(0, |s| s.0.dim())
}

/// `||x||` for `x` of length `len == dim`.
///
/// # Safety
/// `x` points to `len` doubles; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_norm(s: *const PlSpace, x: *const f64, len: usize, out: *mut f64) -> PlStatus {
    guard(|| {
        let s = deref(s)?;
        let x = slice(x, len)?;
        if len != s.0.dim() {
            return Err(fail(Error::DimensionMismatch {
                expected: s.0.dim(),
                got: len,
            }));
        }
        let v = s.0.norm(&Vector::from_column_slice(x)).map_err(fail)?;
        if out.is_null() {
            return Err(PlStatus::NullPointer);
        }
        *out = v;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// subspaces

/// Span of `count` vectors stored back to back (`count * dim` doubles).
///
/// # Safety
/// `s` is a live handle, `vectors` points to `count * dim` doubles, `out` is
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_subspace_new(
    s: *const PlSpace,
    vectors: *const f64,
    count: usize,
    out: *mut *mut PlSubspace,
) -> PlStatus {
    guard(|| {
        let s = deref(s)?;
        let n = s.0.dim();
        if count == 0 {
            return Err(invalid("a subspace needs at least one vector"));
        }
        let data = slice(vectors, count * n)?;
        // back-to-back vectors are the columns of a column-major matrix
        let basis = Matrix::from_column_slice(n, count, data);
        let sub = Subspace::span(s.0.clone(), &basis).map_err(fail)?;
        store(out, PlSubspace(sub))
    })
}

/// # Safety
/// `x` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_subspace_free(x: *mut PlSubspace) {
    free(x)
}

/// Dimension, or 0 for NULL.
///
/// # Safety
/// `x` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_subspace_dim(x: *const PlSubspace) -> usize {
    x.as_ref().map_or(0, |x| x.0.dim())
}

// ---------------------------------------------------------------------------
// projections

/// Minimal projection of the whole space onto `y`; writes `λ(Y, X)` to
/// `lambda` and the projection to `out` (either may be NULL).
///
/// # Safety
/// `y` is a live handle; `lambda` and `out` are NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pl_minimal_projection(
    y: *const PlSubspace,
    tau: f64,
    lambda: *mut f64,
    out: *mut *mut PlProjection,
) -> PlStatus {
    guard(|| {
        let y = deref(y)?;
        if !(tau > 0.0) {
            return Err(invalid("tau must be positive"));
        }
        let opts = MinProjOptions {
            tau,
            ..MinProjOptions::default()
        };
        let full = Subspace::full(y.0.ambient().clone());
        let r = minimal_projection(&full, &y.0, None, &opts).map_err(fail)?;
        if !lambda.is_null() {
            *lambda = r.lambda;
        }
        if !out.is_null() {
            store(out, PlProjection(r.projection))?;
        }
        Ok(())
    })
}

/// # Safety
/// `p` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_projection_free(p: *mut PlProjection) {
    free(p)
}

/// Operator norm on the projection's domain.
///
/// # Safety
/// `p` is a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_projection_norm(p: *const PlProjection, out: *mut f64) -> PlStatus {
    guard(|| {
        let p = deref(p)?;
        let v = p.0.norm(&NormOptions::default()).map_err(fail)?;
        if out.is_null() {
            return Err(PlStatus::NullPointer);
        }
        *out = v.value;
        Ok(())
    })
}

/// Copies the `dim x dim` ambient matrix, row-major, into `buf` of length
/// `len >= dim * dim`.
///
/// # Safety
/// `p` is a live handle, `buf` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_projection_matrix(p: *const PlProjection, buf: *mut f64, len: usize) -> PlStatus {
    guard(|| {
        let p = deref(p)?;
        let m = p.0.matrix();
        let need = m.nrows() * m.ncols();
        if len < need {
            return Err(invalid("buffer too small"));
        }
        if buf.is_null() {
            return Err(PlStatus::NullPointer);
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (i, row) in m.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i * m.ncols() + j] = *v;
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// experiments

/// Runs an experiment config (JSON text). File references resolve against
/// `base_dir` (NULL for the working directory). A report is produced even
/// when the experiment itself fails; check `pl_report_ok`.
///
/// # Safety
/// `config` is a NUL-terminated string, `base_dir` NULL or one, `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_run_config(
    config: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut PlReport,
) -> PlStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(text(config)?).map_err(fail)?;
        let base = if base_dir.is_null() { "." } else { text(base_dir)? };
        let report = cli::run(&cfg, Path::new(base));
        if let Some(e) = &report.error {
            set_error(e.clone());
        }
        store(out, PlReport(report))
    })
}

/// # Safety
/// `r` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_report_free(r: *mut PlReport) {
    free(r)
}

/// 1 when every certification passed, 0 otherwise (or for NULL).
///
/// # Safety
/// `r` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_report_ok(r: *const PlReport) -> i32 {
    r.as_ref().map_or(0, |r| r.0.ok as i32)
}

/// The report as JSON; release with `pl_string_free`. NULL for NULL.
///
/// # Safety
/// `r` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_report_json(r: *const PlReport) -> *mut c_char {
    match r.as_ref() {
        Some(r) => CString::new(r.0.to_json()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}
