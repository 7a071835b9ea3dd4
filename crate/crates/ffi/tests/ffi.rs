use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use weyl_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ws_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn table_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("t.wslt").to_str().unwrap()).unwrap();
    unsafe {
        let mut t: *mut WsTable = ptr::null_mut();
        assert_eq!(ws_table_build(2, 7, 1_000_000, &mut t), WsStatus::Ok);
        assert_eq!(ws_table_len(t), 49);

        let mut m = 0.0;
        assert_eq!(ws_table_moment(t, 2, true, &mut m), WsStatus::Ok);
        assert!((m - (2.0 * 7f64.powi(4) - 7f64.powi(3))).abs() < 1e-6);
        assert_eq!(
            ws_table_moment(t, 3, true, &mut m),
            WsStatus::InvalidArgument
        );

        let mut v = 0.0;
        // index 1 is a = (0, 1): a Gauss sum
        assert_eq!(ws_table_magnitude(t, 1, &mut v), WsStatus::Ok);
        assert!((v - 7f64.sqrt()).abs() < 1e-12);
        assert_eq!(ws_table_magnitude(t, 49, &mut v), WsStatus::InvalidArgument);

        assert_eq!(ws_table_save(t, file.as_ptr()), WsStatus::Ok);
        let mut u: *mut WsTable = ptr::null_mut();
        assert_eq!(ws_table_load(file.as_ptr(), &mut u), WsStatus::Ok);
        for i in 0..49 {
            let (mut a, mut b) = (0.0, 0.0);
            ws_table_magnitude(t, i, &mut a);
            ws_table_magnitude(u, i, &mut b);
            assert_eq!(a.to_bits(), b.to_bits());
        }
        ws_table_free(t);
        ws_table_free(u);
        ws_table_free(ptr::null_mut());
        assert_eq!(ws_table_len(ptr::null()), 0);
    }
}

#[test]
fn table_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.wslt");
    let file = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut t: *mut WsTable = ptr::null_mut();
        assert_eq!(
            ws_table_build(2, 1024, 1_000_000, &mut t),
            WsStatus::InvalidField
        );
        assert!(t.is_null());
        assert!(last_error().contains("1024"));
        assert_eq!(
            ws_table_build(3, 401, 1000, &mut t),
            WsStatus::ResourceLimit
        );

        assert_eq!(ws_table_build(2, 5, 1000, &mut t), WsStatus::Ok);
        assert_eq!(ws_table_save(t, file.as_ptr()), WsStatus::Ok);
        ws_table_free(t);
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, bytes).unwrap();
        let mut u: *mut WsTable = ptr::null_mut();
        assert_eq!(
            ws_table_load(file.as_ptr(), &mut u),
            WsStatus::ChecksumMismatch
        );
        assert!(u.is_null());

        let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        assert_eq!(ws_table_load(missing.as_ptr(), &mut u), WsStatus::Io);
        assert_eq!(ws_table_load(ptr::null(), &mut u), WsStatus::NullPointer);
    }
}

#[test]
fn sums_and_constants() {
    unsafe {
        let (mut re, mut im) = (0.0, 0.0);
        let a = [3u64, 1];
        assert_eq!(
            ws_complete_sum(13, a.as_ptr(), 2, &mut re, &mut im),
            WsStatus::Ok
        );
        assert!(((re * re + im * im).sqrt() - 13f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            ws_complete_sum(15, a.as_ptr(), 2, &mut re, &mut im),
            WsStatus::InvalidField
        );

        // x = (1/2, 0): sum of (-1)^n
        let x = [0.5, 0.0];
        assert_eq!(
            ws_weyl_sum(x.as_ptr(), 2, 7, &mut re, &mut im),
            WsStatus::Ok
        );
        assert!((re + 1.0).abs() < 1e-12 && im.abs() < 1e-12);
        let nan = [f64::NAN];
        assert_eq!(
            ws_weyl_sum(nan.as_ptr(), 1, 7, &mut re, &mut im),
            WsStatus::InvalidArgument
        );

        let nums = [1i64, 0];
        assert_eq!(
            ws_weyl_sum_rational(nums.as_ptr(), 2, 4, 8, &mut re, &mut im),
            WsStatus::Ok
        );
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);

        let (mut num, mut den) = (0u64, 0u64);
        assert_eq!(ws_beta(3, &mut num, &mut den), WsStatus::Ok);
        assert_eq!((num, den), (3, 2));
        assert_eq!(ws_kappa(3, &mut num, &mut den), WsStatus::Ok);
        assert_eq!((num, den), (1, 4));
        assert_eq!(ws_kappa(2, &mut num, &mut den), WsStatus::InvalidArgument);
    }
}

#[test]
fn discrepancy_of_small_sets() {
    unsafe {
        let (mut d, mut star) = (0.0, 0.0);
        let pts = [0.0, 0.25, 0.5, 0.75];
        assert_eq!(
            ws_discrepancy(pts.as_ptr(), 4, &mut d, &mut star),
            WsStatus::Ok
        );
        assert_eq!(d, 1.0);
        assert_eq!(star, 1.0);
        let bad = [1.0];
        assert_eq!(
            ws_discrepancy(bad.as_ptr(), 1, &mut d, &mut star),
            WsStatus::InvalidArgument
        );
        assert_eq!(
            ws_discrepancy(ptr::null(), 0, &mut d, &mut star),
            WsStatus::InvalidArgument
        );
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/weyl_ffi.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "typedef struct WsTable WsTable",
        "WS_STATUS_OK",
        "WS_STATUS_CHECKSUM_MISMATCH",
        "ws_table_build",
        "ws_table_free",
        "ws_complete_sum",
        "ws_weyl_sum",
        "ws_discrepancy",
        "ws_last_error_message",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // a C compiler is optional in the build environment
    if let Ok(o) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}
