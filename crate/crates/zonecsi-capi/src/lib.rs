//! C ABI over the zonecsi toolkit.
//!
//! Conventions: every fallible call returns a [`ZcStatus`] and writes its
//! result through an out-pointer that is touched only on `ZC_STATUS_OK`.
//! On failure a thread-local message is set, readable via
//! [`zc_last_error`]. Scenes are opaque handles owned by the library;
//! free them with [`zc_scene_free`]. No call unwinds across the boundary:
//! panics are caught and reported as `ZC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use zonecsi::geom::Point3;
use zonecsi::pipeline;
use zonecsi::precode::csi_overhead_reduction;
use zonecsi::raytrace::{path_loss_fspl, reflection_loss, RadioConfig};
use zonecsi::scene::{feasible_locations, load_scene, quantize_merge, Material, Scene};
use zonecsi::surrogate::metrics_from_counts;
use zonecsi::Error;

/// Result of every fallible ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid argument or configuration value.
    InvalidArgument = 3,
    /// Scene file failed to parse or validate.
    ParseError = 4,
    /// Numerically degenerate input (ill-conditioned channel, degenerate
    /// partition).
    NumericError = 5,
    /// A pipeline stage is missing or stale upstream artifacts.
    MissingArtifact = 6,
    /// File system or serialization failure.
    IoError = 7,
    /// Internal panic; the library state is still consistent.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("nul bytes removed");
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn status_of(err: &Error) -> ZcStatus {
    match err {
        Error::InvalidArgument(_) | Error::InvalidConfig(_) | Error::Toml(_) => {
            ZcStatus::InvalidArgument
        }
        Error::SceneParse { .. }
        | Error::NonCoplanar { .. }
        | Error::InvalidPlane { .. }
        | Error::UnknownMaterial(_) => ZcStatus::ParseError,
        Error::DegeneratePartition(_) | Error::IllConditioned(_) => ZcStatus::NumericError,
        Error::MissingArtifact { .. } | Error::StaleArtifact { .. } => ZcStatus::MissingArtifact,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) => ZcStatus::IoError,
    }
}

fn fail(err: Error) -> ZcStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Runs a fallible body, converting panics into `ZC_STATUS_PANIC` so no
/// unwind crosses the ABI.
fn guard<F: FnOnce() -> ZcStatus>(f: F) -> ZcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            set_error(&msg);
            ZcStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or a pointer to a NUL-terminated string that stays
/// valid for the duration of the call.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, ZcStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(ZcStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        ZcStatus::InvalidUtf8
    })
}

fn require_out<T>(ptr: *mut T, what: &str) -> Result<(), ZcStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(ZcStatus::NullArgument);
    }
    Ok(())
}

/// Opaque loaded scene.
pub struct ZcScene {
    scene: Scene,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next zonecsi call on the same thread.
#[no_mangle]
pub extern "C" fn zc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads and validates a scene file, shifting all coordinates by the given
/// origin. On success writes a heap-owned handle to `out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer;
/// the returned handle must be released with [`zc_scene_free`].
#[no_mangle]
pub unsafe extern "C" fn zc_scene_load(
    path: *const c_char,
    origin_x: f64,
    origin_y: f64,
    origin_z: f64,
    out: *mut *mut ZcScene,
) -> ZcStatus {
    guard(|| {
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        if ![origin_x, origin_y, origin_z].iter().all(|v| v.is_finite()) {
            set_error("origin must be finite");
            return ZcStatus::InvalidArgument;
        }
        match load_scene(Path::new(path), Point3::new(origin_x, origin_y, origin_z)) {
            Ok(scene) => {
                clear_error();
                out.write(Box::into_raw(Box::new(ZcScene { scene })));
                ZcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a scene handle. A null handle is a no-op.
///
/// # Safety
/// `scene` must be null or a handle produced by this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn zc_scene_free(scene: *mut ZcScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of planar surfaces in the scene.
///
/// # Safety
/// `scene` must be a live handle from this library and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_scene_plane_count(
    scene: *const ZcScene,
    out: *mut usize,
) -> ZcStatus {
    guard(|| {
        if scene.is_null() {
            set_error("scene is null");
            return ZcStatus::NullArgument;
        }
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        clear_error();
        out.write((*scene).scene.planes.len());
        ZcStatus::Ok
    })
}

/// Quantizes vertices to the resolution grid and merges coincident planes,
/// returning a new handle.
///
/// # Safety
/// `scene` must be a live handle and `out` a valid pointer; the new handle
/// must be released with [`zc_scene_free`].
#[no_mangle]
pub unsafe extern "C" fn zc_scene_quantize(
    scene: *const ZcScene,
    resolution: f64,
    out: *mut *mut ZcScene,
) -> ZcStatus {
    guard(|| {
        if scene.is_null() {
            set_error("scene is null");
            return ZcStatus::NullArgument;
        }
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        match quantize_merge(&(*scene).scene, resolution) {
            Ok(q) => {
                clear_error();
                out.write(Box::into_raw(Box::new(ZcScene { scene: q })));
                ZcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of feasible UT lattice points at the given spacing.
///
/// # Safety
/// `scene` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_scene_feasible_count(
    scene: *const ZcScene,
    spacing: f64,
    out: *mut usize,
) -> ZcStatus {
    guard(|| {
        if scene.is_null() {
            set_error("scene is null");
            return ZcStatus::NullArgument;
        }
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        match feasible_locations(&(*scene).scene, spacing) {
            Ok(points) => {
                clear_error();
                out.write(points.len());
                ZcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Free-space path loss in dB over `distance_m` at `frequency_hz` with the
/// given path-loss exponent.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_fspl_db(
    distance_m: f64,
    frequency_hz: f64,
    exponent: f64,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        let cfg = RadioConfig {
            frequency_hz,
            path_loss_exponent: exponent,
            ..RadioConfig::default()
        };
        if let Err(e) = cfg.validate() {
            return fail(e);
        }
        match path_loss_fspl(distance_m, &cfg) {
            Ok(v) => {
                clear_error();
                out.write(v);
                ZcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Reflection loss in dB for a material with the given reflection
/// coefficient (in [0, 1]) and roughness factor (in (0, 1]).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_reflection_loss_db(
    reflection_coefficient: f64,
    roughness_factor: f64,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        if !(0.0..=1.0).contains(&reflection_coefficient) || reflection_coefficient == 0.0 {
            set_error("reflection coefficient must be in (0, 1]");
            return ZcStatus::InvalidArgument;
        }
        if !(roughness_factor > 0.0 && roughness_factor <= 1.0) {
            set_error("roughness factor must be in (0, 1]");
            return ZcStatus::InvalidArgument;
        }
        let material = Material {
            reflection_coefficient,
            roughness_factor,
        };
        clear_error();
        out.write(reflection_loss(&material));
        ZcStatus::Ok
    })
}

/// Cohen's kappa from a 2x2 confusion matrix. Degenerate tables (one class
/// only) come back as NaN.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_cohen_kappa(
    true_positive: u64,
    false_positive: u64,
    true_negative: u64,
    false_negative: u64,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        if true_positive == 0 && false_positive == 0 && true_negative == 0 && false_negative == 0
        {
            set_error("confusion matrix is empty");
            return ZcStatus::InvalidArgument;
        }
        let metrics =
            metrics_from_counts(true_positive, false_positive, true_negative, false_negative);
        clear_error();
        out.write(metrics.kappa);
        ZcStatus::Ok
    })
}

/// CSI overhead reduction in percent when only `rf_chains` of `antennas`
/// coefficients are sounded: 100 (1 - rf/antennas).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zc_csi_overhead_reduction(
    antennas: usize,
    rf_chains: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        if let Err(status) = require_out(out, "out") {
            return status;
        }
        if antennas == 0 || rf_chains > antennas {
            set_error("need 0 < rf_chains <= antennas");
            return ZcStatus::InvalidArgument;
        }
        clear_error();
        out.write(csi_overhead_reduction(antennas, rf_chains));
        ZcStatus::Ok
    })
}

/// Runs pipeline stages against a config file and artifact directory.
/// `stages` is a comma-separated list (null or empty means all stages);
/// `seed_override` replaces the config seed when non-null; `force` re-runs
/// up-to-date stages and accepts stale upstream artifacts.
///
/// # Safety
/// `config_path` and `out_dir` must be valid NUL-terminated strings;
/// `stages` and `seed_override` must each be null or valid for the call.
#[no_mangle]
pub unsafe extern "C" fn zc_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    stages: *const c_char,
    seed_override: *const u64,
    force: bool,
) -> ZcStatus {
    guard(|| {
        let config_path = match read_str(config_path, "config_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let out_dir = match read_str(out_dir, "out_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let stage_list = if stages.is_null() {
            pipeline::Stage::ALL.to_vec()
        } else {
            let text = match read_str(stages, "stages") {
                Ok(s) => s,
                Err(status) => return status,
            };
            if text.trim().is_empty() {
                pipeline::Stage::ALL.to_vec()
            } else {
                match pipeline::parse_stages(text) {
                    Ok(v) => v,
                    Err(e) => return fail(e),
                }
            }
        };
        let mut cfg = match pipeline::load_config(Path::new(config_path)) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        if !seed_override.is_null() {
            cfg.seed = *seed_override;
        }
        match pipeline::run_pipeline(&cfg, &stage_list, &PathBuf::from(out_dir), force) {
            Ok(_) => {
                clear_error();
                ZcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
