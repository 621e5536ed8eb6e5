//! The C ABI exercised from Rust.

use std::ffi::{CStr, CString};
use std::ptr;

use rbl_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rbl_last_error()) }
        .to_string_lossy()
        .into_owned()
}

/// Unit-square anchors around a small triangle body, column-major.
fn planar_setup() -> (*mut RblAnchors, *mut RblConformation, Vec<f64>) {
    let anchors = [-20.0, -20.0, 20.0, -20.0, 20.0, 20.0, -20.0, 20.0];
    let body = [1.0, 0.0, -0.5, 0.8, -0.5, -0.8];
    let (mut a, mut c) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(rbl_anchors_new(2, anchors.as_ptr(), 4, &mut a), RblStatus::Ok);
        assert_eq!(rbl_conformation_new(2, body.as_ptr(), 3, &mut c), RblStatus::Ok);
    }
    // body rotated by 90 degrees and moved to (3, -2)
    let world = [[3.0, -1.0], [2.2, -2.5], [3.8, -2.5]];
    let mut ranges = Vec::new();
    for node in world {
        for a in anchors.chunks(2) {
            ranges.push(((node[0] - a[0]).powi(2) + (node[1] - a[1]).powi(2)).sqrt());
        }
    }
    (a, c, ranges)
}

#[test]
fn localizes_a_planar_body() {
    let (a, c, ranges) = planar_setup();
    let mut pose = ptr::null_mut();
    unsafe {
        let st = rbl_localize_two_stage(a, c, ranges.as_ptr(), 0.0, RblWeighting::Uniform, &mut pose);
        assert_eq!(st, RblStatus::Ok, "{}", last_error());
        assert_eq!(rbl_pose_dim(pose), 2);
        let mut t = [0.0; 2];
        let mut r = [0.0; 4];
        assert_eq!(rbl_pose_translation(pose, t.as_mut_ptr(), 2), RblStatus::Ok);
        assert_eq!(rbl_pose_rotation(pose, r.as_mut_ptr(), 4), RblStatus::Ok);
        assert!((t[0] - 3.0).abs() < 1e-9 && (t[1] + 2.0).abs() < 1e-9, "{t:?}");
        // column-major [[0, -1], [1, 0]]
        let expected = [0.0, 1.0, -1.0, 0.0];
        for (got, want) in r.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{r:?}");
        }
        assert_eq!(
            rbl_pose_rotation(pose, r.as_mut_ptr(), 3),
            RblStatus::DimensionMismatch
        );
        rbl_pose_free(pose);
        rbl_anchors_free(a);
        rbl_conformation_free(c);
    }
}

#[test]
fn missing_ranges_are_nan() {
    let (a, c, mut ranges) = planar_setup();
    let mut pose = ptr::null_mut();
    unsafe {
        // every node keeps 3 of 4 anchors, enough in 2D
        ranges[0] = f64::NAN;
        ranges[5] = f64::NAN;
        assert_eq!(
            rbl_localize_two_stage(
                a,
                c,
                ranges.as_ptr(),
                0.0,
                RblWeighting::InverseVariance,
                &mut pose
            ),
            RblStatus::Ok
        );
        rbl_pose_free(pose);
        ranges.iter_mut().for_each(|r| *r = f64::NAN);
        let st = rbl_localize_two_stage(a, c, ranges.as_ptr(), 0.0, RblWeighting::Uniform, &mut pose);
        assert_eq!(st, RblStatus::TooFewObservations);
        assert!(last_error().contains("too few"));
        rbl_anchors_free(a);
        rbl_conformation_free(c);
    }
}

#[test]
fn null_and_invalid_inputs() {
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(
            rbl_conformation_new(2, ptr::null(), 3, &mut c),
            RblStatus::NullPointer
        );
        assert!(last_error().contains("coords"));
        let pts = [0.0; 4];
        assert_eq!(
            rbl_conformation_new(4, pts.as_ptr(), 1, &mut c),
            RblStatus::DimensionMismatch
        );
        assert_eq!(
            rbl_conformation_new(2, pts.as_ptr(), 2, ptr::null_mut()),
            RblStatus::NullPointer
        );
        let dup = [1.0, 1.0, 1.0, 1.0];
        let mut a = ptr::null_mut();
        assert_eq!(
            rbl_anchors_new(2, dup.as_ptr(), 2, &mut a),
            RblStatus::InvalidArgument
        );
        assert_eq!(rbl_pose_dim(ptr::null()), 0);
        rbl_pose_free(ptr::null_mut());
        rbl_string_free(ptr::null_mut());
    }
}

#[test]
fn frame_potential_and_placement() {
    let third = std::f64::consts::TAU / 3.0;
    let u: Vec<f64> = (0..3)
        .flat_map(|i| [(i as f64 * third).cos(), (i as f64 * third).sin()])
        .collect();
    let mut fp = 0.0;
    let mut pos = [0.0; 12];
    unsafe {
        assert_eq!(rbl_frame_potential(2, u.as_ptr(), 3, &mut fp), RblStatus::Ok);
        assert!((fp - 4.5).abs() < 1e-12);
        let center = [1.0, 2.0, 3.0];
        assert_eq!(
            rbl_optimize_placement(3, 4, center.as_ptr(), 10.0, 1, pos.as_mut_ptr(), &mut fp),
            RblStatus::Ok
        );
    }
    assert!((fp - 16.0 / 3.0).abs() < 1e-3);
    for p in pos.chunks(3) {
        let r = ((p[0] - 1.0).powi(2) + (p[1] - 2.0).powi(2) + (p[2] - 3.0).powi(2)).sqrt();
        assert!((r - 10.0).abs() < 1e-9);
    }
}

#[test]
fn completes_a_distance_matrix() {
    let pts: [[f64; 2]; 8] = [
        [0.0, 0.0],
        [3.0, 0.5],
        [1.0, 4.0],
        [-2.0, 2.5],
        [4.0, 3.0],
        [-1.0, -3.0],
        [2.5, -2.0],
        [5.0, -1.0],
    ];
    let n = pts.len();
    let mut d = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            d[j * n + i] = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
        }
    }
    let truth = d[7 * n];
    d[7 * n] = f64::NAN;
    d[7] = f64::NAN;
    let mut out = vec![0.0; n * n];
    unsafe {
        assert_eq!(
            rbl_complete_edm(d.as_ptr(), n, 2, 0, out.as_mut_ptr()),
            RblStatus::Ok,
            "{}",
            last_error()
        );
    }
    assert!((out[7] - truth).abs() < 1e-6 * truth);
}

#[test]
fn runs_an_experiment_from_json() {
    let cfg = CString::new(
        r#"{"scenario": "rmse_vs_sensors", "sigma_list": [0.0], "sensor_counts": [4, 6], "trials": 5}"#,
    )
    .unwrap();
    let mut table = ptr::null_mut();
    let mut csv = ptr::null_mut();
    unsafe {
        assert_eq!(
            rbl_run_experiment(cfg.as_ptr(), &mut table),
            RblStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(rbl_result_table_rows(table), 2);
        assert_eq!(rbl_result_table_csv(table, &mut csv), RblStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        assert_eq!(text.lines().count(), 3);
        rbl_string_free(csv);
        rbl_result_table_free(table);

        let bad = CString::new(r#"{"scenario": "rmse_vs_sensors", "trials": 0}"#).unwrap();
        assert_eq!(rbl_run_experiment(bad.as_ptr(), &mut table), RblStatus::Config);
        assert!(last_error().contains("trials"));
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rbl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
