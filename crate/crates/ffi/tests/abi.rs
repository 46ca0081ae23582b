use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use thinflow_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { tf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert!(n >= s.len());
    s
}

fn pair_flow() -> *mut TfFlow {
    let bumps = [
        TfBump {
            center_x: -0.5,
            center_y: 0.6,
            radius: 0.3,
            amplitude: 2.0,
        },
        TfBump {
            center_x: 0.5,
            center_y: 0.6,
            radius: 0.3,
            amplitude: -2.0,
        },
    ];
    let mut flow = ptr::null_mut();
    assert_eq!(unsafe { tf_flow_new(1.0, 0.01, bumps.as_ptr(), 2, 0.2, &mut flow) }, TfStatus::Ok);
    flow
}

#[test]
fn family_maps_far_points_to_a_scaled_copy() {
    let mut fam = ptr::null_mut();
    unsafe {
        assert_eq!(tf_family_new(0.1, &mut fam), TfStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(tf_family_map(fam, 0.0, 2.0, &mut re, &mut im), TfStatus::Ok);
        // T(2i) = 2i + sqrt(-5) on the branch with T(z) ~ 2z
        assert!((re).abs() < 1e-14 && (im - (2.0 + 5f64.sqrt()) / 1.1).abs() < 1e-13, "{re} {im}");
        let mut ext = -1;
        assert_eq!(tf_family_is_exterior(fam, 0.0, 0.0, &mut ext), TfStatus::Ok);
        assert_eq!(ext, 0);
        assert_eq!(tf_family_is_exterior(fam, 3.0, 0.0, &mut ext), TfStatus::Ok);
        assert_eq!(ext, 1);
        tf_family_free(fam);
    }
}

#[test]
fn invalid_arguments_report_codes_and_messages() {
    let mut fam = ptr::null_mut();
    unsafe {
        assert_eq!(tf_family_new(-1.0, &mut fam), TfStatus::MapError);
        assert!(fam.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(tf_family_new(0.1, ptr::null_mut()), TfStatus::NullPointer);
        assert_eq!(last_error(), "null output pointer");
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(tf_family_map(ptr::null(), 1.0, 1.0, &mut re, &mut im), TfStatus::NullPointer);

        let touching = TfBump {
            center_x: 0.5,
            center_y: 0.05,
            radius: 0.2,
            amplitude: 1.0,
        };
        let mut flow = ptr::null_mut();
        assert_eq!(tf_flow_new(1.0, 0.01, &touching, 1, 0.2, &mut flow), TfStatus::FieldError);
        assert!(last_error().contains("intersects the curve"));
        assert_eq!(tf_flow_new(1.0, 0.01, ptr::null(), 3, 0.2, &mut flow), TfStatus::NullPointer);

        // success clears the message
        assert_eq!(tf_family_new(0.1, &mut fam), TfStatus::Ok);
        assert_eq!(tf_last_error_message(ptr::null_mut(), 0), 0);
        tf_family_free(fam);
        tf_family_free(ptr::null_mut());
    }
}

#[test]
fn error_messages_truncate_safely() {
    unsafe {
        assert_eq!(tf_family_new(0.1, ptr::null_mut()), TfStatus::NullPointer);
        let mut buf = [0x7f as std::ffi::c_char; 5];
        let n = tf_last_error_message(buf.as_mut_ptr(), buf.len());
        assert_eq!(n, "null output pointer".len());
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "null");
    }
}

#[test]
fn harmonic_field_has_unit_circulation() {
    let flow = pair_flow();
    unsafe {
        let mut alpha = 0.0;
        assert_eq!(tf_flow_alpha(flow, &mut alpha), TfStatus::Ok);
        assert!((alpha - 1.0).abs() < 1e-9);
        for kind in [TfFieldKind::Harmonic, TfFieldKind::Initial, TfFieldKind::Limit] {
            let mut field = ptr::null_mut();
            assert_eq!(tf_field_new(flow, kind, 0.1, 4.0, &mut field), TfStatus::Ok);
            let mut c = 0.0;
            assert_eq!(tf_field_circulation(field, 0.0, 0.0, 5.0, 256, &mut c), TfStatus::Ok);
            assert!((c - 1.0).abs() < 1e-6, "{kind:?} {c}");
            tf_field_free(field);
        }
        let mut field = ptr::null_mut();
        assert_eq!(tf_field_new(flow, TfFieldKind::Shifted, 0.1, 1.0, &mut field), TfStatus::InvalidArgument);
        tf_flow_free(flow);
    }
}

#[test]
fn batched_velocities_match_single_points() {
    let flow = pair_flow();
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(tf_field_new(flow, TfFieldKind::Induced, 0.1, 4.0, &mut field), TfStatus::Ok);
        let xs = [2.0, -1.5, 0.3];
        let ys = [1.0, 0.7, -2.0];
        let (mut u1, mut u2) = ([0.0; 3], [0.0; 3]);
        assert_eq!(tf_field_velocity(field, xs.as_ptr(), ys.as_ptr(), 3, u1.as_mut_ptr(), u2.as_mut_ptr()), TfStatus::Ok);
        for i in 0..3 {
            let (mut a, mut b) = (0.0, 0.0);
            assert_eq!(tf_field_velocity(field, &xs[i], &ys[i], 1, &mut a, &mut b), TfStatus::Ok);
            assert_eq!((a, b), (u1[i], u2[i]));
        }
        assert_eq!(
            tf_field_velocity(field, xs.as_ptr(), ptr::null(), 3, u1.as_mut_ptr(), u2.as_mut_ptr()),
            TfStatus::NullPointer
        );
        tf_field_free(field);
        tf_flow_free(flow);
    }
}

#[test]
fn solver_conserves_circulation_through_the_abi() {
    let flow = pair_flow();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(tf_solver_new(flow, 0.1, 48, 96, 100.0, 1e-3, &mut s), TfStatus::Ok);
        assert_eq!(tf_solver_step(s, 20), TfStatus::Ok);
        let (mut t, mut beta, mut defect) = (0.0, 0.0, 1.0);
        assert_eq!(tf_solver_time(s, &mut t), TfStatus::Ok);
        assert!((t - 0.02).abs() < 1e-12);
        assert_eq!(tf_solver_circulation(s, &mut beta, &mut defect), TfStatus::Ok);
        assert!(defect.abs() < 1e-12 && beta.is_finite());
        let (mut u1, mut u2) = (0.0, 0.0);
        assert_eq!(tf_solver_velocity(s, 0.0, 1.5, &mut u1, &mut u2), TfStatus::Ok);
        assert!(u1.is_finite() && u2.is_finite() && (u1, u2) != (0.0, 0.0));
        assert_eq!(tf_solver_velocity(s, 900.0, 0.0, &mut u1, &mut u2), TfStatus::SolverError);
        tf_solver_free(s);

        let mut bad = ptr::null_mut();
        assert_eq!(tf_solver_new(flow, 0.1, 48, 96, 100.0, -1.0, &mut bad), TfStatus::SolverError);
        tf_flow_free(flow);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(tf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_abi_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/thinflow.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "typedef struct TfFamily TfFamily",
        "TF_STATUS_NULL_POINTER",
        "tf_last_error_message",
        "tf_field_velocity",
        "tf_solver_step",
        "typedef struct TfBump",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status() {
        Ok(status) => assert!(status.success(), "{cc} rejected the header"),
        Err(e) => eprintln!("skipping C syntax check: {cc} unavailable ({e})"),
    }
}
