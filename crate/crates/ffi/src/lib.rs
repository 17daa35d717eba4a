//! C interface to magray.
//!
//! Scenes are opaque handles created by `magray_scene_from_json` or
//! `magray_scene_load` and released with `magray_scene_free`. Every fallible
//! call returns a [`MagrayStatus`]; on failure `magray_last_error` describes the
//! problem until the next call on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use magray::error::MagrayError;
use magray::flow::{scattering, BoundaryPoint};
use magray::harness::report::{all_checks, run_suite};
use magray::io::FieldFile;
use magray::scene::{Scene, SceneError};
use magray::transport::Workspace;

/// Opaque scene handle.
pub struct MagrayScene {
    scene: Scene,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagrayStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Trapped = 4,
    SolverStalled = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

fn classify(e: &MagrayError) -> MagrayStatus {
    match e {
        MagrayError::Scene(SceneError::Io(_)) | MagrayError::Io(_) => MagrayStatus::Io,
        MagrayError::Scene(_) | MagrayError::Json(_) => MagrayStatus::Parse,
        MagrayError::Trapped(_) => MagrayStatus::Trapped,
        MagrayError::SolverStalled { .. } => MagrayStatus::SolverStalled,
        _ => MagrayStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus the last-error text.
fn guard(f: impl FnOnce() -> Result<(), (MagrayStatus, String)>) -> MagrayStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MagrayStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MagrayStatus::Panic
        }
    }
}

fn fail(e: impl Into<MagrayError>) -> (MagrayStatus, String) {
    let e = e.into();
    (classify(&e), e.to_string())
}

fn null(what: &str) -> (MagrayStatus, String) {
    (MagrayStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MagrayStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            MagrayStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn scene_ref<'a>(p: *const MagrayScene) -> Result<&'a Scene, (MagrayStatus, String)> {
    p.as_ref().map(|h| &h.scene).ok_or_else(|| null("scene"))
}

fn put<T>(out: *mut T, v: T) {
    if !out.is_null() {
        unsafe { out.write(v) };
    }
}

fn new_handle(scene: Scene, out: *mut *mut MagrayScene) {
    unsafe { out.write(Box::into_raw(Box::new(MagrayScene { scene }))) };
}

/// Parses a scene from JSON text.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn magray_scene_from_json(
    json: *const c_char,
    out: *mut *mut MagrayScene,
) -> MagrayStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = Scene::from_json_str(text(json, "json")?).map_err(fail)?;
        new_handle(scene, out);
        Ok(())
    })
}

/// Loads a scene file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn magray_scene_load(
    path: *const c_char,
    out: *mut *mut MagrayScene,
) -> MagrayStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = Scene::load(text(path, "path")?).map_err(fail)?;
        new_handle(scene, out);
        Ok(())
    })
}

/// Releases a scene; null is ignored.
///
/// # Safety
/// `scene` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn magray_scene_free(scene: *mut MagrayScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Rank n of the connection; 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn magray_scene_rank(scene: *const MagrayScene) -> usize {
    scene.as_ref().map_or(0, |h| h.scene.n())
}

/// Sizes of the ∂₊ grid: ns boundary points by nphi directions.
///
/// # Safety
/// `scene` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn magray_boundary_grid(
    scene: *const MagrayScene,
    ns: *mut usize,
    nphi: *mut usize,
) -> MagrayStatus {
    guard(|| {
        let s = scene_ref(scene)?;
        put(ns, s.grid.ns);
        put(nphi, s.grid.nphi);
        Ok(())
    })
}

/// Scattering relation: the curve entering at (cos s, sin s) at angle φ from
/// the inward normal leaves at s_exit with angle φ_exit from the outward
/// normal after time tau.
///
/// # Safety
/// `scene` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn magray_scatter(
    scene: *const MagrayScene,
    s: f64,
    phi: f64,
    s_exit: *mut f64,
    phi_exit: *mut f64,
    tau: *mut f64,
) -> MagrayStatus {
    guard(|| {
        let sc = scene_ref(scene)?;
        let b = BoundaryPoint::new(s, phi);
        if !b.is_inward() {
            return Err((
                MagrayStatus::InvalidArgument,
                format!("phi = {phi} is not inward"),
            ));
        }
        let (e, t) = scattering(sc, b).map_err(fail)?;
        put(s_exit, e.s);
        put(phi_exit, e.phi);
        put(tau, t);
        Ok(())
    })
}

/// Ray transform of a field file (JSON text) on the ∂₊ grid. Writes
/// ns·nphi·n complex values as interleaved (re, im) pairs, layout [s][φ][comp],
/// so `out` needs 2·ns·nphi·n doubles; `len` is its length in doubles.
///
/// # Safety
/// `scene` must be a live handle, `field_json` a valid C string and `out`
/// valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn magray_transform(
    scene: *const MagrayScene,
    field_json: *const c_char,
    out: *mut f64,
    len: usize,
) -> MagrayStatus {
    guard(|| {
        let sc = scene_ref(scene)?;
        let field = FieldFile::from_json_str(text(field_json, "field_json")?).map_err(fail)?;
        let need = 2 * sc.grid.ns * sc.grid.nphi * sc.n();
        if out.is_null() {
            return Err(null("out"));
        }
        if len < need {
            return Err((
                MagrayStatus::BufferTooSmall,
                format!("need {need} doubles, got {len}"),
            ));
        }
        let ws = Workspace::new(sc);
        let w = ws
            .ray_transform(&field.tensor(sc.n()).map_err(fail)?.to_band(sc))
            .map_err(fail)?;
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (pair, z) in dst.chunks_exact_mut(2).zip(&w.data) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Runs the comma-separated checks (all when `checks` is null) and stores 1 in
/// `passed` when none failed.
///
/// # Safety
/// `scene` must be a live handle, `checks` null or a valid C string.
#[no_mangle]
pub unsafe extern "C" fn magray_verify(
    scene: *const MagrayScene,
    checks: *const c_char,
    seed: u64,
    passed: *mut c_int,
) -> MagrayStatus {
    guard(|| {
        let sc = scene_ref(scene)?;
        let names: Vec<&str> = if checks.is_null() {
            all_checks()
        } else {
            text(checks, "checks")?
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect()
        };
        let report = run_suite(sc, &names, seed).map_err(fail)?;
        put(passed, c_int::from(report.passed()));
        Ok(())
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn magray_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn magray_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
