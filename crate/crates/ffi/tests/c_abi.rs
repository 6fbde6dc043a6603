use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use equisym_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(equisym_last_error()) }.to_string_lossy().into_owned()
}

fn image(side: usize, f: impl Fn(usize, usize) -> f64) -> *mut EquisymImage {
    let values: Vec<f64> = (0..side * side).map(|q| f(q / side, q % side)).collect();
    let mut out = ptr::null_mut();
    let s = unsafe { equisym_image_new(side, 0.25, values.as_ptr(), values.len(), &mut out) };
    assert_eq!(s, EquisymStatus::Ok);
    out
}

fn gaussian(side: usize, sx: f64, sy: f64) -> *mut EquisymImage {
    let c = (side as f64 - 1.0) / 2.0;
    image(side, |i, j| {
        let (x, y) = ((i as f64 - c) * 0.25, (j as f64 - c) * 0.25);
        (-(x * x) / (2.0 * sx * sx) - (y * y) / (2.0 * sy * sy)).exp()
    })
}

fn regularizer(name: &str, agg: EquisymAggregation) -> *mut EquisymRegularizer {
    let name = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { equisym_regularizer_new(name.as_ptr(), agg, &mut out) }, EquisymStatus::Ok);
    out
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(equisym_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn image_round_trip_and_errors() {
    let img = image(4, |i, j| (i * 4 + j) as f64 / 16.0);
    assert_eq!(unsafe { equisym_image_side(img) }, 4);
    let mut buf = [0.0; 16];
    assert_eq!(unsafe { equisym_image_values(img, buf.as_mut_ptr(), 16) }, EquisymStatus::Ok);
    assert_eq!(buf[5], 5.0 / 16.0);
    assert_eq!(
        unsafe { equisym_image_values(img, buf.as_mut_ptr(), 3) },
        EquisymStatus::InvalidArgument
    );

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.pgm").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { equisym_image_save(img, path.as_ptr()) }, EquisymStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { equisym_image_load(path.as_ptr(), &mut back) }, EquisymStatus::Ok);
    let mut again = [0.0; 16];
    unsafe { equisym_image_values(back, again.as_mut_ptr(), 16) };
    assert!(buf.iter().zip(&again).all(|(a, b)| (a - b).abs() <= 1.0 / 510.0));

    let missing = CString::new("/no/such/file.pgm").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { equisym_image_load(missing.as_ptr(), &mut none) }, EquisymStatus::Io);
    assert!(none.is_null());
    assert!(last_error().contains("/no/such/file.pgm"));

    let v = [0.0; 3];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { equisym_image_new(2, 1.0, v.as_ptr(), 3, &mut out) }, EquisymStatus::InvalidArgument);
    assert_eq!(unsafe { equisym_image_new(2, 1.0, ptr::null(), 4, &mut out) }, EquisymStatus::NullPointer);
    let v = [0.0; 4];
    assert_eq!(unsafe { equisym_image_new(2, -1.0, v.as_ptr(), 4, &mut out) }, EquisymStatus::Domain);

    unsafe {
        equisym_image_free(img);
        equisym_image_free(back);
        equisym_image_free(ptr::null_mut());
    }
}

#[test]
fn regularizer_names_and_response() {
    let bad = CString::new("tv3").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { equisym_regularizer_new(bad.as_ptr(), EquisymAggregation::Magnitude, &mut out) },
        EquisymStatus::InvalidArgument
    );
    let reg = regularizer("tv", EquisymAggregation::Magnitude);
    let img = gaussian(41, 2.0, 2.0);
    let (mut r0, mut r1) = (0.0, 0.0);
    let id = [1.0, 0.0, 0.0, 1.0];
    let quarter = [0.0, 1.0, -1.0, 0.0];
    assert_eq!(unsafe { equisym_feature_response(img, reg, id.as_ptr(), &mut r0) }, EquisymStatus::Ok);
    assert_eq!(unsafe { equisym_feature_response(img, reg, quarter.as_ptr(), &mut r1) }, EquisymStatus::Ok);
    assert!(r0 > 0.0 && (r0 - r1).abs() <= 1e-12 * r0);
    let singular = [1.0, 2.0, 0.5, 1.0];
    assert_eq!(
        unsafe { equisym_feature_response(img, reg, singular.as_ptr(), &mut r1) },
        EquisymStatus::Domain
    );
    assert_eq!(
        unsafe { equisym_feature_response(ptr::null(), reg, id.as_ptr(), &mut r1) },
        EquisymStatus::NullPointer
    );
    unsafe {
        equisym_image_free(img);
        equisym_regularizer_free(reg);
    }
}

#[test]
fn epsilon_and_fit() {
    let reg = regularizer("tv", EquisymAggregation::Directional);
    let imgs = [gaussian(48, 2.0, 1.0), gaussian(48, 1.5, 1.5)];
    let handles: Vec<*const EquisymImage> = imgs.iter().map(|&p| p as *const _).collect();
    let (mut sample, mut dataset, mut adaptive) = (0.0, 0.0, 0.0);
    unsafe {
        let s = equisym_epsilon(handles.as_ptr(), 2, reg, EquisymScenario::SampleStrict, 8, ptr::null(), &mut sample);
        assert_eq!(s, EquisymStatus::Ok);
        let s = equisym_epsilon(handles.as_ptr(), 2, reg, EquisymScenario::DatasetStrict, 8, ptr::null(), &mut dataset);
        assert_eq!(s, EquisymStatus::Ok);
        assert_eq!(
            equisym_epsilon(handles.as_ptr(), 2, reg, EquisymScenario::DatasetAdaptive, 8, ptr::null(), &mut adaptive),
            EquisymStatus::NullPointer
        );
        let w = [0.0, 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0, 1.0, 1.0];
        let s = equisym_epsilon(handles.as_ptr(), 2, reg, EquisymScenario::DatasetAdaptive, 8, w.as_ptr(), &mut adaptive);
        assert_eq!(s, EquisymStatus::Ok);
    }
    assert!(sample >= dataset && dataset > adaptive, "{sample} {dataset} {adaptive}");

    let mut w = [0.0; 3];
    let mut obj = 0.0;
    let s = unsafe { equisym_fit_w(handles[0], reg, 8, 3, false, w.as_mut_ptr(), &mut obj) };
    assert_eq!(s, EquisymStatus::Ok);
    assert!(obj.is_finite() && w[1] > 0.0 && w[2] > 0.0);
    let s = unsafe { equisym_fit_w(handles[0], reg, 0, 3, false, w.as_mut_ptr(), &mut obj) };
    assert_eq!(s, EquisymStatus::Domain);
    unsafe {
        for p in imgs {
            equisym_image_free(p);
        }
        equisym_regularizer_free(reg);
    }
}

#[test]
fn suite_results_as_json() {
    let name = CString::new("quadrature").unwrap();
    let mut json = ptr::null_mut();
    let mut passed = false;
    assert_eq!(unsafe { equisym_run_suite(name.as_ptr(), &mut json, &mut passed) }, EquisymStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { equisym_string_free(json) };
    assert!(passed);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v[0]["name"], "quadrature");
    let bad = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { equisym_run_suite(bad.as_ptr(), &mut json, &mut passed) },
        EquisymStatus::InvalidArgument
    );
    assert!(last_error().contains("unknown suite"));
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("equisym.h")).unwrap();
    for f in [
        "equisym_image_new",
        "equisym_image_free",
        "equisym_regularizer_new",
        "equisym_epsilon",
        "equisym_fit_w",
        "equisym_run_suite",
        "equisym_last_error",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "equisym.h"
int use(void) {
    EquisymImage *img = NULL;
    double v[4] = {0, 1, 2, 3};
    EquisymStatus s = equisym_image_new(2, 0.5, v, 4, &img);
    equisym_image_free(img);
    return s == EQUISYM_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(dir.path().join("use.o"))
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found, skipping the compile check");
        return;
    };
    assert!(status.success());
}
