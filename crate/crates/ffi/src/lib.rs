//! C ABI over `weyl-core`.
//!
//! Every fallible call returns a [`WsStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`ws_last_error_message`]. Tables are opaque handles released with
//! [`ws_table_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use weyl_core::complete::{self, CoeffVector, CompleteSumTable};
use weyl_core::discrepancy::{discrepancy_exact, star_discrepancy, PointSet1D};
use weyl_core::large;
use weyl_core::weyl::{weyl_sum, TorusPoint};
use weyl_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidField = 3,
    ResourceLimit = 4,
    ChecksumMismatch = 5,
    MalformedCache = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Opaque table of `|T_{d,p}(a)|` over all `a` in `F_p^d`.
pub struct WsTable(CompleteSumTable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> WsStatus {
    match e {
        Error::InvalidField(_) => WsStatus::InvalidField,
        Error::ResourceLimit { .. } => WsStatus::ResourceLimit,
        Error::ChecksumMismatch => WsStatus::ChecksumMismatch,
        Error::MalformedCache(_) => WsStatus::MalformedCache,
        Error::Io(_) => WsStatus::Io,
        _ => WsStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), (WsStatus, String)>>(f: F) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WsStatus::Internal
        }
    }
}

fn core_err(e: Error) -> (WsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WsStatus, String) {
    (WsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(
    ptr: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (WsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, (WsStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| (WsStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (WsStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

/// Message for the most recent failure on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the table for `(d, p)`, refusing more than `cap` entries.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_table_build(
    d: u32,
    p: u64,
    cap: u64,
    out: *mut *mut WsTable,
) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = CompleteSumTable::build(d, p, cap).map_err(core_err)?;
        *out = Box::into_raw(Box::new(WsTable(t)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_table_load(path_: *const c_char, out: *mut *mut WsTable) -> WsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = complete::load_table(path(path_)?).map_err(core_err)?;
        *out = Box::into_raw(Box::new(WsTable(t)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ws_table_save(table: *const WsTable, path_: *const c_char) -> WsStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        complete::save_table(&t.0, path(path_)?).map_err(core_err)
    })
}

/// Number of entries, `p^d`; 0 for a null handle.
///
/// # Safety
/// `table` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ws_table_len(table: *const WsTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// `|T(a)|` at a row-major index (`a_1` slowest).
///
/// # Safety
/// `table` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_table_magnitude(
    table: *const WsTable,
    index: usize,
    out: *mut f64,
) -> WsStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if index >= t.0.len() {
            return Err((
                WsStatus::InvalidArgument,
                format!("index {index} out of range"),
            ));
        }
        write(out, t.0.magnitude(index), "out")
    })
}

/// `sum |T(a)|^{2 nu}` over all `a`, optionally skipping `a = 0`.
///
/// # Safety
/// `table` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_table_moment(
    table: *const WsTable,
    nu: u32,
    include_zero: bool,
    out: *mut f64,
) -> WsStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if nu == 0 || nu > t.0.d() {
            return Err((
                WsStatus::InvalidArgument,
                format!("nu = {nu} must lie in [1, d]"),
            ));
        }
        write(out, t.0.moment(nu, include_zero), "out")
    })
}

/// # Safety
/// `table` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ws_table_free(table: *mut WsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// `T_{d,p}(a) = sum_{n<p} e_p(a_1 n + ... + a_d n^d)` with `d = len`.
///
/// # Safety
/// `coeffs` must hold `len` values; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_complete_sum(
    p: u64,
    coeffs: *const u64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WsStatus {
    guard(|| {
        let a = CoeffVector::new(slice(coeffs, len, "coeffs")?.to_vec(), p).map_err(core_err)?;
        let z = complete::complete_sum(p, &a).map_err(core_err)?;
        write(out_re, z.re, "out_re")?;
        write(out_im, z.im, "out_im")
    })
}

/// `S_d(x; N)` with `d = len`, coordinates given as doubles (reduced mod 1).
///
/// # Safety
/// `x` must hold `len` values; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_weyl_sum(
    x: *const f64,
    len: usize,
    n: u64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WsStatus {
    guard(|| {
        let x = slice(x, len, "x")?;
        if x.is_empty() || x.iter().any(|t| !t.is_finite()) {
            return Err((
                WsStatus::InvalidArgument,
                "x must be a nonempty finite vector".into(),
            ));
        }
        let z = weyl_sum(&TorusPoint::from_f64(x), n).map_err(core_err)?;
        write(out_re, z.re, "out_re")?;
        write(out_im, z.im, "out_im")
    })
}

/// `S_d(a/q; N)` evaluated exactly mod `q` before the exponential.
///
/// # Safety
/// `nums` must hold `len` values; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_weyl_sum_rational(
    nums: *const i64,
    len: usize,
    q: u64,
    n: u64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WsStatus {
    guard(|| {
        let x = TorusPoint::rational(slice(nums, len, "nums")?, q).map_err(core_err)?;
        let z = weyl_sum(&x, n).map_err(core_err)?;
        write(out_re, z.re, "out_re")?;
        write(out_im, z.im, "out_im")
    })
}

/// Exact extreme and star discrepancy (unnormalised, in points) of values in `[0, 1)`.
///
/// # Safety
/// `points` must hold `len` values; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_discrepancy(
    points: *const f64,
    len: usize,
    out_d: *mut f64,
    out_star: *mut f64,
) -> WsStatus {
    guard(|| {
        let pts = slice(points, len, "points")?;
        if pts.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err((
                WsStatus::InvalidArgument,
                "points must lie in [0, 1)".into(),
            ));
        }
        let set = PointSet1D::from_f64(pts);
        write(out_d, discrepancy_exact(&set).map_err(core_err)?, "out_d")?;
        write(
            out_star,
            star_discrepancy(&set).map_err(core_err)?,
            "out_star",
        )
    })
}

/// `beta_d` as an exact fraction.
///
/// # Safety
/// The out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_beta(d: u32, out_num: *mut u64, out_den: *mut u64) -> WsStatus {
    guard(|| {
        let r = large::beta(d).map_err(core_err)?;
        write(out_num, *r.numer(), "out_num")?;
        write(out_den, *r.denom(), "out_den")
    })
}

/// `kappa_d` as an exact fraction.
///
/// # Safety
/// The out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ws_kappa(d: u32, out_num: *mut u64, out_den: *mut u64) -> WsStatus {
    guard(|| {
        let r = large::kappa(d).map_err(core_err)?;
        write(out_num, *r.numer(), "out_num")?;
        write(out_den, *r.denom(), "out_den")
    })
}
