use std::ffi::{CStr, CString};
use std::ptr;

use elecdyn_ffi::*;

const RUN: &str = r#"
profile = "bridge_conflict"
balance = "70_30"
slate = "centrist_ladder"
voter_mechanism = "consensus_pull"
candidate_mechanism = "static"
n = 50
rounds = 4
seed = 9

[rule]
kind = "plurality"

[overrides.dynamics]
sigma_eps = 0.0
sigma_delta = 0.0
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(elecdyn_last_error()) }.to_string_lossy().into_owned()
}

fn open(text: &str) -> (ElecdynStatus, *mut ElecdynRun) {
    let cfg = CString::new(text).unwrap();
    let mut run = ptr::null_mut();
    let status = unsafe { elecdyn_run_from_toml(cfg.as_ptr(), &mut run) };
    (status, run)
}

#[test]
fn run_handle_round_trip() {
    let (status, run) = open(RUN);
    assert_eq!(status, ElecdynStatus::Ok, "{}", last_error());
    assert!(!run.is_null());

    let mut len = 0;
    assert_eq!(unsafe { elecdyn_run_len(run, &mut len) }, ElecdynStatus::Ok);
    assert_eq!(len, 5);

    let mut d = vec![f64::NAN; len];
    let status = unsafe { elecdyn_run_metric(run, ElecdynMetric::VoterVariance, d.as_mut_ptr(), d.len()) };
    assert_eq!(status, ElecdynStatus::Ok);
    assert!(d.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(d[len - 1] < d[0]);

    let mut short = [0.0; 2];
    let status = unsafe { elecdyn_run_metric(run, ElecdynMetric::WinnerRadius, short.as_mut_ptr(), short.len()) };
    assert_eq!(status, ElecdynStatus::OutOfRange);

    let mut w = [f64::NAN; 2];
    assert_eq!(unsafe { elecdyn_run_winner(run, 0, w.as_mut_ptr(), 2) }, ElecdynStatus::Ok);
    assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
    assert_eq!(unsafe { elecdyn_run_winner(run, len, w.as_mut_ptr(), 2) }, ElecdynStatus::OutOfRange);
    assert_eq!(unsafe { elecdyn_run_winner(run, 0, w.as_mut_ptr(), 3) }, ElecdynStatus::InvalidArgument);

    let (mut ok, mut worst) = (false, f64::NAN);
    assert_eq!(unsafe { elecdyn_run_check_voter_bound(run, &mut ok, &mut worst) }, ElecdynStatus::Ok);
    assert!(ok, "violation {worst}");

    unsafe { elecdyn_run_free(run) };
}

#[test]
fn metrics_match_the_engine() {
    let (_, run) = open(RUN);
    let reference = elecdyn::runner::run_simulation(&elecdyn::runner::RunConfig::from_toml(RUN).unwrap()).unwrap();
    let mut r = vec![0.0; reference.records.len()];
    unsafe { elecdyn_run_metric(run, ElecdynMetric::WinnerRadius, r.as_mut_ptr(), r.len()) };
    let expected: Vec<f64> = reference.records.iter().map(|rec| rec.r).collect();
    assert_eq!(r, expected);
    unsafe { elecdyn_run_free(run) };
}

#[test]
fn noisy_runs_refuse_the_bound_check() {
    let (_, run) = open(&RUN.replace("sigma_eps = 0.0", "sigma_eps = 0.02"));
    let (mut ok, mut worst) = (false, 0.0);
    assert_eq!(unsafe { elecdyn_run_check_voter_bound(run, &mut ok, &mut worst) }, ElecdynStatus::Refused);
    assert!(!last_error().is_empty());
    unsafe { elecdyn_run_free(run) };
}

#[test]
fn bad_configs_report_config_errors() {
    let (status, run) = open("profile = \"nowhere\"\n");
    assert_eq!(status, ElecdynStatus::Config);
    assert!(run.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_rejected() {
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { elecdyn_run_from_toml(ptr::null(), &mut run) }, ElecdynStatus::NullPointer);
    let mut len = 0;
    assert_eq!(unsafe { elecdyn_run_len(ptr::null(), &mut len) }, ElecdynStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { elecdyn_pairwise_variance(ptr::null(), 3, 2, &mut v) }, ElecdynStatus::NullPointer);
    unsafe { elecdyn_run_free(ptr::null_mut()) };
}

#[test]
fn geometry_helpers() {
    let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let mut v = 0.0;
    assert_eq!(unsafe { elecdyn_pairwise_variance(pts.as_ptr(), 4, 2, &mut v) }, ElecdynStatus::Ok);
    assert!((v - 0.5).abs() < 1e-15);

    let w = [0.5, 0.5];
    let mut r = 0.0;
    assert_eq!(unsafe { elecdyn_winner_radius(pts.as_ptr(), 4, 2, w.as_ptr(), &mut r) }, ElecdynStatus::Ok);
    assert!((r - 0.5f64.sqrt()).abs() < 1e-15);

    let (lo, hi) = ([0.0, 0.0], [1.0, 1.0]);
    let mut c = [f64::NAN; 2];
    let mut radius = f64::NAN;
    let status =
        unsafe { elecdyn_chebyshev_center(pts.as_ptr(), 4, 2, lo.as_ptr(), hi.as_ptr(), c.as_mut_ptr(), &mut radius) };
    assert_eq!(status, ElecdynStatus::Ok);
    assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9);
    assert!((radius - 0.5f64.sqrt()).abs() < 1e-9);

    assert_eq!(unsafe { elecdyn_pairwise_variance(pts.as_ptr(), 0, 2, &mut v) }, ElecdynStatus::InvalidArgument);
    let bad_hi = [-1.0, 1.0];
    let status = unsafe {
        elecdyn_chebyshev_center(pts.as_ptr(), 4, 2, lo.as_ptr(), bad_hi.as_ptr(), c.as_mut_ptr(), &mut radius)
    };
    assert_eq!(status, ElecdynStatus::Domain);
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(elecdyn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/elecdyn.h")).unwrap();
    for name in [
        "elecdyn_last_error",
        "elecdyn_version",
        "elecdyn_run_from_toml",
        "elecdyn_run_free",
        "elecdyn_run_len",
        "elecdyn_run_metric",
        "elecdyn_run_winner",
        "elecdyn_run_check_voter_bound",
        "elecdyn_pairwise_variance",
        "elecdyn_winner_radius",
        "elecdyn_chebyshev_center",
        "typedef struct ElecdynRun ElecdynRun",
        "ELECDYN_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}
