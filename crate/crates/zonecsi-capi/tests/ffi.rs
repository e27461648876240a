//! Exercises the C ABI end to end from Rust: handle lifecycle, out-pointer
//! discipline, status mapping, and a short pipeline run. The generated
//! header is also syntax-checked as C.

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use zonecsi_capi::{
    zc_cohen_kappa, zc_csi_overhead_reduction, zc_fspl_db, zc_last_error, zc_reflection_loss_db,
    zc_run_pipeline, zc_scene_feasible_count, zc_scene_free, zc_scene_load, zc_scene_plane_count,
    zc_scene_quantize, zc_version, ZcScene, ZcStatus,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../zonecsi/fixtures")
        .join(name)
}

fn cstring(path: &PathBuf) -> CString {
    CString::new(path.to_str().expect("utf-8 path")).expect("no interior nul")
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(zc_last_error()) }
        .to_str()
        .expect("error message is utf-8")
        .to_string()
}

#[test]
fn version_is_a_nonempty_c_string() {
    let v = unsafe { CStr::from_ptr(zc_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn scene_handles_round_trip() {
    let path = cstring(&fixture("room.scene"));
    let mut scene: *mut ZcScene = ptr::null_mut();
    let status = unsafe { zc_scene_load(path.as_ptr(), 0.0, 0.0, 0.0, &mut scene) };
    assert_eq!(status, ZcStatus::Ok);
    assert!(!scene.is_null());

    let mut planes = 0usize;
    assert_eq!(
        unsafe { zc_scene_plane_count(scene, &mut planes) },
        ZcStatus::Ok
    );
    assert_eq!(planes, 13);

    let mut quantized: *mut ZcScene = ptr::null_mut();
    assert_eq!(
        unsafe { zc_scene_quantize(scene, 0.5, &mut quantized) },
        ZcStatus::Ok
    );
    let mut feasible = 0usize;
    assert_eq!(
        unsafe { zc_scene_feasible_count(quantized, 1.0, &mut feasible) },
        ZcStatus::Ok
    );
    // 16 x 10 lattice at 1 m inside the bounds, one z level, minus the four
    // points inside the metal box.
    assert_eq!(feasible, 156);

    unsafe {
        zc_scene_free(quantized);
        zc_scene_free(scene);
        zc_scene_free(ptr::null_mut());
    }
}

#[test]
fn null_arguments_are_reported() {
    let mut scene: *mut ZcScene = ptr::null_mut();
    let status = unsafe { zc_scene_load(ptr::null(), 0.0, 0.0, 0.0, &mut scene) };
    assert_eq!(status, ZcStatus::NullArgument);
    assert!(last_error().contains("path"));
    assert!(scene.is_null());

    let path = cstring(&fixture("room.scene"));
    let status = unsafe { zc_scene_load(path.as_ptr(), 0.0, 0.0, 0.0, ptr::null_mut()) };
    assert_eq!(status, ZcStatus::NullArgument);

    let mut out = 0usize;
    assert_eq!(
        unsafe { zc_scene_plane_count(ptr::null(), &mut out) },
        ZcStatus::NullArgument
    );
    assert_eq!(
        unsafe { zc_fspl_db(1.0, 28e9, 2.1, ptr::null_mut()) },
        ZcStatus::NullArgument
    );
}

#[test]
fn missing_scene_file_maps_to_io_error() {
    let path = CString::new("/nonexistent/room.scene").unwrap();
    let mut scene: *mut ZcScene = ptr::null_mut();
    let status = unsafe { zc_scene_load(path.as_ptr(), 0.0, 0.0, 0.0, &mut scene) };
    assert_eq!(status, ZcStatus::IoError);
    assert!(last_error().contains("room.scene"));
    assert!(scene.is_null());
}

#[test]
fn fspl_matches_the_free_space_reference() {
    let mut out = 0.0f64;
    assert_eq!(
        unsafe { zc_fspl_db(1.0, 28e9, 2.1, &mut out) },
        ZcStatus::Ok
    );
    // At 1 m the exponent term vanishes: 20 log10(4 pi f / c).
    assert!((out - 61.39094384872776).abs() < 1e-9, "got {out}");

    assert_eq!(
        unsafe { zc_fspl_db(-1.0, 28e9, 2.1, &mut out) },
        ZcStatus::InvalidArgument
    );
}

#[test]
fn reflection_loss_matches_the_log_rule() {
    let mut out = 0.0f64;
    assert_eq!(
        unsafe { zc_reflection_loss_db(0.5, 1.0, &mut out) },
        ZcStatus::Ok
    );
    assert!((out - 6.020599913279624).abs() < 1e-12);
    assert_eq!(
        unsafe { zc_reflection_loss_db(0.0, 1.0, &mut out) },
        ZcStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { zc_reflection_loss_db(0.5, 1.5, &mut out) },
        ZcStatus::InvalidArgument
    );
}

#[test]
fn kappa_and_overhead_have_reference_values() {
    let mut kappa = 0.0f64;
    assert_eq!(
        unsafe { zc_cohen_kappa(40, 10, 40, 10, &mut kappa) },
        ZcStatus::Ok
    );
    // po = 0.8, pe = 0.5 -> kappa = 0.6.
    assert!((kappa - 0.6).abs() < 1e-12, "got {kappa}");

    // Perfect agreement on a single class is degenerate: NaN flag.
    assert_eq!(
        unsafe { zc_cohen_kappa(5, 0, 0, 0, &mut kappa) },
        ZcStatus::Ok
    );
    assert!(kappa.is_nan());

    assert_eq!(
        unsafe { zc_cohen_kappa(0, 0, 0, 0, &mut kappa) },
        ZcStatus::InvalidArgument
    );

    let mut pct = 0.0f64;
    assert_eq!(
        unsafe { zc_csi_overhead_reduction(256, 22, &mut pct) },
        ZcStatus::Ok
    );
    assert_eq!(pct, 91.40625);
    assert_eq!(
        unsafe { zc_csi_overhead_reduction(8, 9, &mut pct) },
        ZcStatus::InvalidArgument
    );
}

#[test]
fn pipeline_runs_and_reports_missing_upstreams() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    let config = cstring(&fixture("room.toml"));
    let stages = CString::new("preprocess,trace").unwrap();

    let status = unsafe {
        zc_run_pipeline(
            config.as_ptr(),
            out_dir.as_ptr(),
            stages.as_ptr(),
            ptr::null(),
            false,
        )
    };
    assert_eq!(status, ZcStatus::Ok, "{}", last_error());
    assert!(dir.path().join("paths.csv").is_file());
    assert!(dir.path().join("manifest.json").is_file());

    // Zones cannot run without the cluster stage's memberships.
    let stages = CString::new("zones").unwrap();
    let status = unsafe {
        zc_run_pipeline(
            config.as_ptr(),
            out_dir.as_ptr(),
            stages.as_ptr(),
            ptr::null(),
            false,
        )
    };
    assert_eq!(status, ZcStatus::MissingArtifact);
    assert!(last_error().contains("memberships.csv"));

    let bad = CString::new("preprocess,warp").unwrap();
    let status = unsafe {
        zc_run_pipeline(
            config.as_ptr(),
            out_dir.as_ptr(),
            bad.as_ptr(),
            ptr::null(),
            false,
        )
    };
    assert_eq!(status, ZcStatus::InvalidArgument);
}

#[test]
fn generated_header_is_valid_c() {
    let include_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(
        include_dir.join("zonecsi.h").is_file(),
        "header must be generated by the build script"
    );
    let dir = tempfile::tempdir().unwrap();
    let main_c = dir.path().join("check.c");
    std::fs::write(
        &main_c,
        "#include \"zonecsi.h\"\nint main(void) { return (int)ZC_STATUS_OK; }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include_dir)
        .arg(&main_c)
        .output()
        .expect("cc is available");
    assert!(
        out.status.success(),
        "header failed C compilation:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
