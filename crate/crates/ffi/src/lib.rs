//! C ABI for robprec.
//!
//! Matrices cross the boundary as row-major `double` buffers. Handles are
//! opaque and owned by the caller once returned; free them with the matching
//! `*_free` function. Every fallible call returns an [`RpStatus`] and leaves a
//! message retrievable with [`rp_last_error_message`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robprec::matrix::SymMatrix;
use robprec::regularize::PrecisionEstimate;
use robprec::{DataMatrix, Error, LambdaPolicy, PdMatrix, PipelineSpec, PsdMethod, ScaleKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotConverged = 3,
    Numeric = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Solver diagnostics of an estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpDiagnostics {
    pub lambda: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub min_eigenvalue: f64,
    pub edge_count: usize,
    pub converged: c_int,
}

/// An n x p data matrix.
pub struct RpData(DataMatrix);

/// A pipeline: pairwise covariance, PSD repair and graphical lasso settings.
pub struct RpPipeline(PipelineSpec);

/// A fitted precision matrix with its diagnostics.
pub struct RpEstimate(PrecisionEstimate);

const EDGE_TOL: f64 = robprec::metrics::DEFAULT_EDGE_TOL;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: RpStatus, msg: impl Into<String>) -> RpStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> RpStatus {
    let status = match e {
        Error::NotConverged { .. } => RpStatus::NotConverged,
        e if e.is_input_error() => RpStatus::InvalidInput,
        _ => RpStatus::Numeric,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics to [`RpStatus::Panic`].
fn guard(f: impl FnOnce() -> RpStatus) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == RpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(RpStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], RpStatus> {
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, "null data pointer"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], RpStatus> {
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, "null output pointer"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn name<'a>(p: *const c_char) -> Result<&'a str, RpStatus> {
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, "null name"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RpStatus::InvalidInput, "name is not valid UTF-8"))
}

fn square(p: usize) -> Result<usize, RpStatus> {
    p.checked_mul(p)
        .ok_or_else(|| fail(RpStatus::InvalidInput, "dimension overflows"))
}

fn write_row_major(m: &nalgebra::DMatrix<f64>, out: &mut [f64]) {
    let p = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..p {
            out[i * p + j] = m[(i, j)];
        }
    }
}

fn sym_from(values: &[f64], p: usize) -> Result<SymMatrix, RpStatus> {
    SymMatrix::new(nalgebra::DMatrix::from_row_slice(p, p, values)).map_err(|e| from_error(&e))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the untruncated message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies an `n x p` row-major buffer into a new data handle.
///
/// # Safety
/// `values` must point to `n * p` doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rp_data_new(values: *const f64, n: usize, p: usize, out: *mut *mut RpData) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let len = tri!(n.checked_mul(p).ok_or_else(|| fail(RpStatus::InvalidInput, "dimension overflows")));
        let v = tri!(slice(values, len));
        match DataMatrix::from_row_major(n, p, v) {
            Ok(x) => {
                *out = Box::into_raw(Box::new(RpData(x)));
                RpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `data` must be null or a handle from [`rp_data_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rp_data_free(data: *mut RpData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Robust pipeline from estimator names, e.g. `"qn"` and `"npd"`.
///
/// # Safety
/// `scale` and `psd` must be NUL-terminated strings; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn rp_pipeline_new(scale: *const c_char, psd: *const c_char, out: *mut *mut RpPipeline) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let scale = match ScaleKind::from_name(tri!(name(scale))) {
            Ok(k) => k,
            Err(e) => return from_error(&e),
        };
        let psd = match PsdMethod::from_name(tri!(name(psd))) {
            Ok(m) => m,
            Err(e) => return from_error(&e),
        };
        let spec = PipelineSpec::robust(scale, psd, LambdaPolicy::Fixed(0.0));
        *out = Box::into_raw(Box::new(RpPipeline(spec)));
        RpStatus::Ok
    })
}

/// Pipeline using the classical sample covariance.
///
/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rp_pipeline_new_classical(out: *mut *mut RpPipeline) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output handle");
        }
        *out = Box::into_raw(Box::new(RpPipeline(PipelineSpec::classical(LambdaPolicy::Fixed(0.0)))));
        RpStatus::Ok
    })
}

/// Whether the graphical lasso penalizes the diagonal (default: nonzero).
///
/// # Safety
/// `pipeline` must be a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn rp_pipeline_set_penalize_diagonal(pipeline: *mut RpPipeline, penalize: c_int) -> RpStatus {
    guard(|| match pipeline.as_mut() {
        Some(p) => {
            p.0.glasso.penalize_diagonal = penalize != 0;
            RpStatus::Ok
        }
        None => fail(RpStatus::NullPointer, "null pipeline"),
    })
}

/// Solver limits; `max_iter == 0` or `tol <= 0` leave the current value.
///
/// # Safety
/// `pipeline` must be a live pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn rp_pipeline_set_solver(pipeline: *mut RpPipeline, max_iter: usize, tol: f64) -> RpStatus {
    guard(|| match pipeline.as_mut() {
        Some(p) => {
            if max_iter > 0 {
                p.0.glasso.max_outer_iters = max_iter;
            }
            if tol > 0.0 {
                p.0.glasso.tol = tol;
            }
            RpStatus::Ok
        }
        None => fail(RpStatus::NullPointer, "null pipeline"),
    })
}

/// # Safety
/// `pipeline` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rp_pipeline_free(pipeline: *mut RpPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Fits a sparse precision matrix at penalty `lambda`.
///
/// On `RP_STATUS_NOT_CONVERGED` the last iterate is still returned in `out`.
///
/// # Safety
/// `pipeline` and `data` must be live handles; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate(
    pipeline: *const RpPipeline,
    data: *const RpData,
    lambda: f64,
    out: *mut *mut RpEstimate,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let (Some(pipeline), Some(data)) = (pipeline.as_ref(), data.as_ref()) else {
            return fail(RpStatus::NullPointer, "null pipeline or data");
        };
        let mut spec = pipeline.0.clone();
        spec.lambda = LambdaPolicy::Fixed(lambda);
        if let Err(e) = spec.validate() {
            return from_error(&e);
        }
        match spec.estimate(&data.0, lambda) {
            Ok(est) => {
                *out = Box::into_raw(Box::new(RpEstimate(est)));
                RpStatus::Ok
            }
            Err(Error::NotConverged { estimate }) => {
                let status = from_error(&Error::NotConverged { estimate: estimate.clone() });
                *out = Box::into_raw(Box::new(RpEstimate(*estimate)));
                status
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Dimension `p` of the estimate, or 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_dim(est: *const RpEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.0.dim())
}

/// Copies the `p x p` precision matrix, row-major, into `out` of length `len`.
///
/// # Safety
/// `est` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_precision(est: *const RpEstimate, out: *mut f64, len: usize) -> RpStatus {
    guard(|| {
        let Some(est) = est.as_ref() else {
            return fail(RpStatus::NullPointer, "null estimate");
        };
        let need = tri!(square(est.0.dim()));
        if len < need {
            return fail(RpStatus::BufferTooSmall, format!("need {need} doubles, got {len}"));
        }
        write_row_major(&est.0.theta, tri!(slice_mut(out, need)));
        RpStatus::Ok
    })
}

/// # Safety
/// `est` must be a live handle and `out` a writable struct.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_diagnostics(est: *const RpEstimate, out: *mut RpDiagnostics) -> RpStatus {
    guard(|| {
        let (Some(est), false) = (est.as_ref(), out.is_null()) else {
            return fail(RpStatus::NullPointer, "null estimate or output");
        };
        let e = &est.0;
        *out = RpDiagnostics {
            lambda: e.lambda_used,
            iterations: e.outer_iters,
            kkt_residual: e.kkt_residual,
            min_eigenvalue: e.min_eigenvalue,
            edge_count: e.edge_count(EDGE_TOL),
            converged: c_int::from(e.converged),
        };
        RpStatus::Ok
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rp_estimate_free(est: *mut RpEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Gaussian-consistent scale of `x` with the named estimator.
///
/// # Safety
/// `kind` must be a NUL-terminated string, `x` point to `n` doubles and `out`
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_scale(kind: *const c_char, x: *const f64, n: usize, out: *mut f64) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output");
        }
        let kind = match ScaleKind::from_name(tri!(name(kind))) {
            Ok(k) => k,
            Err(e) => return from_error(&e),
        };
        match kind.estimate(tri!(slice(x, n))) {
            Ok(s) => {
                *out = s;
                RpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Nearest positive definite matrix with eigenvalues at least `delta`.
/// `a` and `out` are `p x p` row-major and may alias.
///
/// # Safety
/// `a` and `out` must each point to `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_nearest_pd(a: *const f64, p: usize, delta: f64, out: *mut f64) -> RpStatus {
    guard(|| {
        let len = tri!(square(p));
        let sym = tri!(sym_from(tri!(slice(a, len)), p));
        match robprec::psd::nearest_pd(&sym, delta) {
            Ok(m) => {
                write_row_major(m.as_matrix(), tri!(slice_mut(out, len)));
                RpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Entropy loss `tr(T^-1 H) - log det(T^-1 H) - p` of precision estimate `H`
/// against truth `T`, both `p x p` row-major.
///
/// # Safety
/// `theta_true` and `theta_hat` must point to `p * p` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_entropy_loss(
    theta_true: *const f64,
    theta_hat: *const f64,
    p: usize,
    out: *mut f64,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output");
        }
        let len = tri!(square(p));
        let pd = |v: &[f64]| PdMatrix::new(nalgebra::DMatrix::from_row_slice(p, p, v)).map_err(|e| from_error(&e));
        let t = tri!(pd(tri!(slice(theta_true, len))));
        let h = tri!(pd(tri!(slice(theta_hat, len))));
        match robprec::metrics::entropy_loss(&t, &h) {
            Ok(l) => {
                *out = l;
                RpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Probability that a row of `p` independently contaminated cells holds at
/// least one outlier.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_row_contamination_prob(epsilon: f64, p: usize, out: *mut f64) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RpStatus::NullPointer, "null output");
        }
        match robprec::simlab::row_contamination_prob(epsilon, p) {
            Ok(v) => {
                *out = v;
                RpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
