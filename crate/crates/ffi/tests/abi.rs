use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use framelab_ffi::*;

fn last_error() -> String {
    let p = fl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn system(data: &[f64], rows: usize, cols: usize, p: f64, q: f64) -> *mut FlSystem {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { fl_system_new(data.as_ptr(), rows, cols, p, q, &mut s) }, FlStatus::Ok);
    s
}

#[test]
fn frame_check_round_trip() {
    let g = system(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0], 3, 2, 2.0, 2.0);
    let phi = system(&[1.05, 0.0, 0.0, 1.0, 0.0, 0.05], 3, 2, 2.0, 2.0);
    unsafe {
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(fl_system_shape(g, &mut rows, &mut cols), FlStatus::Ok);
        assert_eq!((rows, cols), (3, 2));

        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(fl_frame_bounds(phi, &mut a, &mut b), FlStatus::Ok);
        assert!(a > 0.99 && b < 1.06 && a <= b);

        let mut mu = 0.0;
        assert_eq!(fl_minimal_mu(g, phi, 0.0, 0.0, &mut mu), FlStatus::Ok);
        assert!((mu - 0.05).abs() < 1e-6, "{mu}");

        let mut report = ptr::null_mut();
        assert_eq!(fl_verify_frame(g, phi, 0.1, 0.0, 0.0, &mut report), FlStatus::Ok);
        let mut verdict = FlVerdict::Inconclusive;
        assert_eq!(fl_report_verdict(report, &mut verdict), FlStatus::Ok);
        assert_eq!(verdict, FlVerdict::Verified);
        let (mut lo, mut hi, mut delta) = (0.0, 0.0, 0.0);
        assert_eq!(fl_report_bounds(report, &mut lo, &mut hi, &mut delta), FlStatus::Ok);
        assert!((delta - 0.1).abs() < 1e-12 && (lo - 0.9).abs() < 1e-9 && (hi - 1.1).abs() < 1e-9);

        let mut json = ptr::null_mut();
        assert_eq!(fl_report_json(report, &mut json), FlStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        assert!(text.contains("\"verdict\": \"verified\""));
        fl_string_free(json);
        fl_report_free(report);

        let mut report = ptr::null_mut();
        assert_eq!(fl_verify_frame(g, phi, 0.01, 0.0, 0.0, &mut report), FlStatus::Ok);
        assert_eq!(fl_report_verdict(report, &mut verdict), FlStatus::Ok);
        assert_eq!(verdict, FlVerdict::HypothesisFails);
        fl_report_free(report);

        fl_system_free(g);
        fl_system_free(phi);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut s = ptr::null_mut();
        let data = [1.0, 2.0];
        assert_eq!(fl_system_new(data.as_ptr(), 1, 2, 0.5, 2.0, &mut s), FlStatus::InvalidArgument);
        assert!(last_error().contains("0.5"));
        assert!(s.is_null());
        assert_eq!(fl_system_new(ptr::null(), 1, 2, 2.0, 2.0, &mut s), FlStatus::NullPointer);
        assert_eq!(fl_system_new(data.as_ptr(), 1, 2, 2.0, 2.0, ptr::null_mut()), FlStatus::NullPointer);
        let nan = [f64::NAN, 1.0];
        assert_eq!(fl_system_new(nan.as_ptr(), 1, 2, 2.0, 2.0, &mut s), FlStatus::InvalidArgument);

        let g = system(&[1.0, 0.0, 0.0, 1.0], 2, 2, 2.0, 2.0);
        let h = system(&[1.0, 0.0, 0.0], 1, 3, 2.0, 2.0);
        let mut mu = 0.0;
        assert_eq!(fl_minimal_mu(g, h, 0.0, 0.0, &mut mu), FlStatus::DimensionMismatch);
        assert_eq!(fl_minimal_mu(g, g, 0.0, 1.5, &mut mu), FlStatus::InvalidArgument);
        assert!(last_error().contains("lambda2"));
        assert_eq!(fl_minimal_mu(g, g, 0.0, 0.0, &mut mu), FlStatus::Ok);
        assert!(fl_last_error_message().is_null());
        assert_eq!(mu, 0.0);
        fl_system_free(g);
        fl_system_free(h);
        fl_system_free(ptr::null_mut());
        fl_report_free(ptr::null_mut());
        fl_string_free(ptr::null_mut());
    }
}

#[test]
fn op_norm_matches_known_values() {
    let m = [1.0, -2.0, 3.0, 4.0];
    let mut out = 0.0;
    unsafe {
        // l^1 -> l^1: largest column sum; l^inf -> l^inf: largest row sum.
        assert_eq!(fl_op_norm(m.as_ptr(), 2, 2, 1.0, 1.0, &mut out), FlStatus::Ok);
        assert!((out - 6.0).abs() < 1e-12);
        assert_eq!(fl_op_norm(m.as_ptr(), 2, 2, f64::INFINITY, f64::INFINITY, &mut out), FlStatus::Ok);
        assert!((out - 7.0).abs() < 1e-12);
    }
}

#[test]
fn jobs_run_from_json_text() {
    let job = CString::new(
        r#"{"spaces": {"X": {"dim": 2, "p": 2}, "Xd": {"dim": 3, "q": 2}},
            "matrices": {"G": [[1, 0], [0, 1], [0, 0]], "Phi": [[1.05, 0], [0, 1], [0, 0.05]]},
            "constants": {"mu": 0.1}, "analysis": "frame", "seed": 3}"#,
    )
    .unwrap();
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(fl_run_job_json(job.as_ptr(), &mut a), FlStatus::Ok);
        assert_eq!(fl_run_job_json(job.as_ptr(), &mut b), FlStatus::Ok);
        let (ta, tb) = (CStr::from_ptr(a).to_str().unwrap(), CStr::from_ptr(b).to_str().unwrap());
        assert_eq!(ta, tb);
        assert!(ta.contains("\"generated_at_unix\": 0"));
        assert!(ta.contains("\"verdict\": \"verified\""));
        fl_string_free(a);
        fl_string_free(b);

        let bad = CString::new(r#"{"analysis": "frame"}"#).unwrap();
        assert_eq!(fl_run_job_json(bad.as_ptr(), &mut a), FlStatus::InvalidJob);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(fl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/framelab.h");
    assert!(header.exists(), "header not generated");
    let lib = target_dir().join("libframelab_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let src = r#"
#include <math.h>
#include <stdio.h>
#include "framelab.h"
int main(void) {
    const double g[] = {1, 0, 0, 1, 0, 0};
    const double phi[] = {1.05, 0, 0, 1, 0, 0.05};
    FlSystem *a = NULL, *b = NULL;
    FlReport *r = NULL;
    FlVerdict v;
    double lo, hi, delta;
    if (fl_system_new(g, 3, 2, 2.0, 2.0, &a) != FL_STATUS_OK) return 1;
    if (fl_system_new(phi, 3, 2, 0.5, INFINITY, &b) != FL_STATUS_INVALID_ARGUMENT) return 2;
    if (fl_system_new(phi, 3, 2, 2.0, 2.0, &b) != FL_STATUS_OK) return 3;
    if (fl_verify_frame(a, b, 0.1, 0.0, 0.0, &r) != FL_STATUS_OK) return 4;
    if (fl_report_verdict(r, &v) != FL_STATUS_OK || v != FL_VERDICT_VERIFIED) return 5;
    fl_report_bounds(r, &lo, &hi, &delta);
    printf("%.6f %.6f %.6f\n", lo, hi, delta);
    fl_report_free(r);
    fl_system_free(a);
    fl_system_free(b);
    return 0;
}
"#;
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("main.c");
    let exe = tmp.path().join("main");
    std::fs::write(&c, src).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&c)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.900000 1.100000 0.100000");
}
