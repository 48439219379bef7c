use std::ffi::{CStr, CString};
use std::ptr;

use ndstab_ffi::*;

const EXAMPLE1: &str = include_str!("../../core/corpus/eq15.json");

fn spec(json: &str) -> *mut NdstabSpec {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ndstab_spec_from_json(text.as_ptr(), &mut out) }, NdstabStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = ndstab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn summary_and_interval() {
    let s = spec(EXAMPLE1);
    let mut summary = NdstabSummary {
        norm_a: 0.0,
        inf_a: 0.0,
        norm_a_plus: 0.0,
        norm_a_minus: 0.0,
        norm_b: 0.0,
        inf_b: 0.0,
        sigma: 0.0,
        tau: 0.0,
        delta: 0.0,
    };
    unsafe {
        assert_eq!(ndstab_spec_validate(s, 1000), NdstabStatus::Ok);
        assert_eq!(ndstab_spec_summary(s, 1000, &mut summary), NdstabStatus::Ok);
        ndstab_spec_free(s);
    }
    assert_eq!((summary.norm_a, summary.tau, summary.sigma), (0.6, 0.14, 0.2));
    let tau0 = unsafe { ndstab_tau0(&summary) };
    assert!((tau0 - 0.4 / std::f64::consts::E).abs() < 1e-15);

    let mut i = NdstabInterval {
        lower: 0.0,
        upper: 0.0,
        lower_open: false,
        upper_open: false,
        empty: true,
    };
    assert_eq!(unsafe { ndstab_alpha_interval_theorem1(&summary, &mut i) }, NdstabStatus::Ok);
    assert!(!i.empty && i.lower_open && !i.upper_open);
    assert!((i.lower - 0.1 * std::f64::consts::E).abs() < 1e-12);
    assert!((i.upper - 0.35 * std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn check_json_auto_and_fixed() {
    let s = spec(EXAMPLE1);
    for alpha in [f64::NAN, 0.5] {
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { ndstab_check_json(s, alpha, 1000, &mut out) }, NdstabStatus::Ok);
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
        unsafe { ndstab_string_free(out) };
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let c3 = v["verdicts"].as_array().unwrap().iter().find(|v| v["criterion"] == "corollary3").unwrap().clone();
        assert_eq!(c3["satisfied"], true);
    }
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ndstab_check_json(s, 1.5, 1000, &mut out) }, NdstabStatus::DomainError);
    assert!(out.is_null());
    assert!(last_error().contains("outside [0, 1]"));
    unsafe { ndstab_spec_free(s) };
}

#[test]
fn simulate_constant_history() {
    let s = spec(EXAMPLE1);
    let mut traj = ptr::null_mut();
    let history = NdstabHistory {
        kind: NdstabHistoryKind::Constant,
        value: 1.0,
        seed: 0,
    };
    assert_eq!(unsafe { ndstab_simulate(s, history, 2.0, 1e-3, &mut traj) }, NdstabStatus::Ok);
    unsafe {
        let n = ndstab_trajectory_len(traj);
        assert_eq!(n, 2001);
        assert_eq!(ndstab_trajectory_t0(traj), 0.0);
        assert_eq!(ndstab_trajectory_step(traj), 1e-3);
        let x = std::slice::from_raw_parts(ndstab_trajectory_x(traj), n);
        let y = std::slice::from_raw_parts(ndstab_trajectory_y(traj), n);
        assert_eq!(x[0], 1.0);
        // y(t0) = x(t0) - 0.6 x(g(t0)) with constant history 1.
        assert!((y[0] - 0.4).abs() < 1e-12);
        assert!(x[n - 1] < 1.0);
        ndstab_trajectory_free(traj);
        ndstab_spec_free(s);
    }
}

#[test]
fn simulate_reports_errors() {
    let s = spec(EXAMPLE1);
    let mut traj = ptr::null_mut();
    let history = NdstabHistory {
        kind: NdstabHistoryKind::Seeded,
        value: 0.0,
        seed: 42,
    };
    assert_eq!(unsafe { ndstab_simulate(s, history, 2.0, -1.0, &mut traj) }, NdstabStatus::SimulationError);
    assert!(traj.is_null());
    assert!(last_error().contains("step"));
    unsafe { ndstab_spec_free(s) };
}

#[test]
fn error_codes() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ndstab_spec_from_json(ptr::null(), &mut out) }, NdstabStatus::NullPointer);
    let bad = CString::new("{\"a\": 1}").unwrap();
    assert_eq!(unsafe { ndstab_spec_from_json(bad.as_ptr(), &mut out) }, NdstabStatus::ParseError);
    assert!(out.is_null());
    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { ndstab_spec_from_json(invalid.as_ptr().cast(), &mut out) },
        NdstabStatus::InvalidUtf8
    );

    let violating = spec(
        r#"{"a": ["const", 1.2], "b": ["const", 1.0], "g": ["-", ["t"], ["const", 1.0]],
            "h": ["-", ["t"], ["const", 1.0]], "t0": 0.0, "horizon": 10.0}"#,
    );
    assert_eq!(unsafe { ndstab_spec_validate(violating, 100) }, NdstabStatus::ValidationError);
    assert!(last_error().contains("NeutralBound"));
    unsafe { ndstab_spec_free(violating) };

    assert!(unsafe { ndstab_tau0(ptr::null()) }.is_nan());
    assert_eq!(unsafe { ndstab_trajectory_len(ptr::null()) }, 0);
    assert!(unsafe { ndstab_trajectory_x(ptr::null()) }.is_null());
    unsafe {
        ndstab_spec_free(ptr::null_mut());
        ndstab_trajectory_free(ptr::null_mut());
        ndstab_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_error() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ndstab_spec_from_json(ptr::null(), &mut out) }, NdstabStatus::NullPointer);
    assert!(!ndstab_last_error_message().is_null());
    let s = spec(EXAMPLE1);
    assert!(ndstab_last_error_message().is_null());
    unsafe { ndstab_spec_free(s) };
}
