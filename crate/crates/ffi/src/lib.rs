//! C ABI for the correlation kernels.
//!
//! Kernels live behind an opaque [`NcdkKernel`] handle. Every fallible call
//! returns an [`NcdkStatus`] and writes its result through an out-pointer;
//! on failure the message is kept per thread and read with
//! [`ncdk_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ncdk::configspace::Configuration;
use ncdk::kernel::{eq_circle_kernel, extended_sine, CorrelationKernel};
use ncdk::transition::ProcessSpec;
use ncdk::Error;

/// Result codes; 0 is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcdkStatus {
    Ok = 0,
    InvalidArgument = 1,
    Domain = 2,
    Config = 3,
    Numerical = 4,
    Unsupported = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Elementary process driving the system.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcdkProcess {
    Dyson = 0,
    Besq = 1,
    Circle = 2,
}

/// Opaque kernel handle.
pub struct NcdkKernel {
    inner: CorrelationKernel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NcdkStatus {
    match e {
        Error::InvalidArgument(_) => NcdkStatus::InvalidArgument,
        Error::Domain(_) => NcdkStatus::Domain,
        Error::Config(_) => NcdkStatus::Config,
        Error::Numerical(_) => NcdkStatus::Numerical,
        Error::Unsupported(_) => NcdkStatus::Unsupported,
        Error::Io(_) => NcdkStatus::Io,
    }
}

/// Run `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (NcdkStatus, String)>) -> NcdkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcdkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NcdkStatus::Panic
        }
    }
}

fn lift(e: Error) -> (NcdkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NcdkStatus, String) {
    (NcdkStatus::NullPointer, format!("{what} is null"))
}

/// Build a kernel for `process` started from `points[0..len]`; repeated
/// points are multiplicities. `nu` is read for BESQ, `r` for the circle.
///
/// # Safety
/// `points` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_new(
    process: NcdkProcess,
    nu: f64,
    r: f64,
    points: *const f64,
    len: usize,
    out: *mut *mut NcdkKernel,
) -> NcdkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if points.is_null() || len == 0 {
            return Err((NcdkStatus::InvalidArgument, "need at least one point".into()));
        }
        let pts = slice::from_raw_parts(points, len);
        let (spec, cfg) = match process {
            NcdkProcess::Dyson => (ProcessSpec::bm(), Configuration::from_points(pts)),
            NcdkProcess::Besq => (ProcessSpec::besq(nu).map_err(lift)?, Configuration::from_points(pts)),
            NcdkProcess::Circle => (ProcessSpec::circle(r, len).map_err(lift)?, Configuration::from_points_circle(r, pts)),
        };
        let inner = CorrelationKernel::new(spec, cfg.map_err(lift)?).map_err(lift)?;
        *out = Box::into_raw(Box::new(NcdkKernel { inner }));
        Ok(())
    })
}

/// Release a kernel; null is ignored.
///
/// # Safety
/// `k` must come from [`ncdk_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_free(k: *mut NcdkKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Number of particles, 0 for a null handle.
///
/// # Safety
/// `k` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_particles(k: *const NcdkKernel) -> usize {
    k.as_ref().map_or(0, |k| k.inner.particles())
}

/// `𝕂(s, x; t, y)`.
///
/// # Safety
/// `k` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_eval(k: *const NcdkKernel, s: f64, x: f64, t: f64, y: f64, out: *mut f64) -> NcdkStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = k.inner.eval(s, x, t, y).map_err(lift)?;
        Ok(())
    })
}

/// One-point density `ρ_1(t, x)`.
///
/// # Safety
/// `k` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_density(k: *const NcdkKernel, t: f64, x: f64, out: *mut f64) -> NcdkStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = k.inner.density(t, x).map_err(lift)?;
        Ok(())
    })
}

/// Correlation function at the space-time points `(ts[i], xs[i])`, `i < m`.
///
/// # Safety
/// `ts`, `xs` must be valid for `m` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ncdk_kernel_corr(
    k: *const NcdkKernel,
    ts: *const f64,
    xs: *const f64,
    m: usize,
    out: *mut f64,
) -> NcdkStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if ts.is_null() || xs.is_null() {
            return Err(null("points"));
        }
        let pts: Vec<(f64, f64)> = slice::from_raw_parts(ts, m).iter().copied().zip(slice::from_raw_parts(xs, m).iter().copied()).collect();
        *out = k.inner.corr_function(&pts).map_err(lift)?;
        Ok(())
    })
}

/// Circle equilibrium kernel at time lag `dt` and displacement `dx`.
#[no_mangle]
pub extern "C" fn ncdk_eq_circle_kernel(r: f64, n: usize, dt: f64, dx: f64) -> f64 {
    if r.is_nan() || r <= 0.0 || n == 0 {
        return f64::NAN;
    }
    eq_circle_kernel(r, n, dt, dx)
}

/// Extended sine kernel of density `rho`.
#[no_mangle]
pub extern "C" fn ncdk_extended_sine(rho: f64, dt: f64, dx: f64) -> f64 {
    extended_sine(rho, dt, dx)
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ncdk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ncdk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_error_truncates_with_terminator() {
        set_error("abcdefgh".into());
        let mut buf = [1 as c_char; 4];
        let n = unsafe { ncdk_last_error(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 8);
        assert_eq!(buf, [b'a' as c_char, b'b' as c_char, b'c' as c_char, 0]);
        assert_eq!(unsafe { ncdk_last_error(ptr::null_mut(), 0) }, 8);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), NcdkStatus::Panic);
        assert_eq!(guard(|| Err(lift(Error::Numerical("x".into())))), NcdkStatus::Numerical);
    }
}
