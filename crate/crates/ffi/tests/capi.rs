use std::ffi::{CStr, CString};
use std::ptr;

use magray_ffi::*;

fn scene(json: &str) -> *mut MagrayScene {
    let json = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { magray_scene_from_json(json.as_ptr(), &mut h) },
        MagrayStatus::Ok
    );
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(magray_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

const FLAT: &str = r#"{"grid": {"nx": 16, "ntheta": 16, "ns": 16, "nphi": 8}}"#;

#[test]
fn euclidean_scattering_through_the_handle() {
    let h = scene(FLAT);
    assert_eq!(unsafe { magray_scene_rank(h) }, 1);
    let (mut s, mut phi, mut tau) = (0.0, 0.0, 0.0);
    let st = unsafe { magray_scatter(h, 0.0, 0.3, &mut s, &mut phi, &mut tau) };
    assert_eq!(st, MagrayStatus::Ok);
    assert!((tau - 2.0 * 0.3f64.cos()).abs() < 1e-6);
    assert!((s - (std::f64::consts::PI + 0.6)).abs() < 1e-6);
    assert!((phi + 0.3).abs() < 1e-6);
    unsafe { magray_scene_free(h) };
}

#[test]
fn transform_fills_the_buffer() {
    let h = scene(FLAT);
    let (mut ns, mut nphi) = (0, 0);
    assert_eq!(
        unsafe { magray_boundary_grid(h, &mut ns, &mut nphi) },
        MagrayStatus::Ok
    );
    let field = CString::new(r#"{"order": 0, "components": [["1"]]}"#).unwrap();
    let mut buf = vec![0.0; 2 * ns * nphi];
    let st = unsafe { magray_transform(h, field.as_ptr(), buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, MagrayStatus::Ok);
    // I(1) is the chord length 2cos φ
    assert!(buf.iter().step_by(2).all(|&v| v > 0.0 && v <= 2.0 + 1e-9));
    assert!(buf.iter().skip(1).step_by(2).all(|&v| v == 0.0));
    let st = unsafe { magray_transform(h, field.as_ptr(), buf.as_mut_ptr(), 3) };
    assert_eq!(st, MagrayStatus::BufferTooSmall);
    unsafe { magray_scene_free(h) };
}

#[test]
fn errors_are_reported() {
    let bad = CString::new(r#"{"sigma": "x +"}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { magray_scene_from_json(bad.as_ptr(), &mut h) },
        MagrayStatus::Parse
    );
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { magray_scene_from_json(ptr::null(), &mut h) },
        MagrayStatus::NullPointer
    );
    let missing = CString::new("/nonexistent/scene.json").unwrap();
    assert_eq!(
        unsafe { magray_scene_load(missing.as_ptr(), &mut h) },
        MagrayStatus::Io
    );
    assert_eq!(unsafe { magray_scene_rank(ptr::null()) }, 0);
    unsafe { magray_scene_free(ptr::null_mut()) };
}

#[test]
fn verify_runs_selected_checks() {
    let h = scene(FLAT);
    let checks = CString::new("euclidean,fiber").unwrap();
    let mut passed = 0;
    assert_eq!(
        unsafe { magray_verify(h, checks.as_ptr(), 1, &mut passed) },
        MagrayStatus::Ok
    );
    assert_eq!(passed, 1);
    assert!(last_error().is_empty());
    let unknown = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { magray_verify(h, unknown.as_ptr(), 1, &mut passed) },
        MagrayStatus::InvalidArgument
    );
    unsafe { magray_scene_free(h) };
}

#[test]
fn header_declares_the_interface() {
    let h =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/magray.h")).unwrap();
    for sym in [
        "magray_scene_from_json",
        "magray_scene_free",
        "magray_transform",
        "magray_last_error",
        "MAGRAY_STATUS_OK",
        "typedef struct MagrayScene MagrayScene",
    ] {
        assert!(h.contains(sym), "{sym} missing from header");
    }
    let v = unsafe { CStr::from_ptr(magray_version()) }
        .to_str()
        .unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
