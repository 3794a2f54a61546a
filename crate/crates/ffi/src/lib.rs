//! C ABI over the `elecdyn` engine.
//!
//! Every fallible function returns an [`ElecdynStatus`]; on failure a message
//! is available from [`elecdyn_last_error`] on the same thread. Simulations are
//! owned through the opaque [`ElecdynRun`] handle and released with
//! [`elecdyn_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elecdyn::bounds::check_voter_bound;
use elecdyn::geometry::{chebyshev_center, pairwise_variance, winner_radius, Point, PointSet, PolicyBox};
use elecdyn::runner::{run_simulation, RoundRecord, RunConfig, RunOutput};
use elecdyn::Error;

/// Result codes shared by every function in this library.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElecdynStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    Refused = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Per-round series that can be copied out of a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElecdynMetric {
    WinnerRadius = 0,
    SupporterRadius = 1,
    VoterVariance = 2,
    CandidateVariance = 3,
    Asymmetry = 4,
    SignedAsymmetry = 5,
    WinnerToMean = 6,
    WinnerToMedian = 7,
}

impl ElecdynMetric {
    fn read(self, r: &RoundRecord) -> f64 {
        match self {
            ElecdynMetric::WinnerRadius => r.r,
            ElecdynMetric::SupporterRadius => r.s,
            ElecdynMetric::VoterVariance => r.d,
            ElecdynMetric::CandidateVariance => r.p,
            ElecdynMetric::Asymmetry => r.a,
            ElecdynMetric::SignedAsymmetry => r.a_signed,
            ElecdynMetric::WinnerToMean => r.dist_winner_to_mean,
            ElecdynMetric::WinnerToMedian => r.dist_winner_to_median,
        }
    }
}

/// A completed simulation.
pub struct ElecdynRun {
    output: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: ElecdynStatus, msg: &str) -> ElecdynStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ElecdynStatus {
    let status = match &e {
        Error::Domain(_) => ElecdynStatus::Domain,
        Error::Config(_) | Error::Toml(_) => ElecdynStatus::Config,
        Error::Refused(_) => ElecdynStatus::Refused,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => ElecdynStatus::Io,
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> ElecdynStatus) -> ElecdynStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(ElecdynStatus::Panic, "internal panic"),
    }
}

/// Copies `n * dim` row-major coordinates into a point set.
///
/// # Safety
/// `points` must be valid for reads of `n * dim` doubles.
unsafe fn point_set(points: *const f64, n: usize, dim: usize) -> Result<PointSet, ElecdynStatus> {
    if points.is_null() {
        return Err(fail(ElecdynStatus::NullPointer, "points is null"));
    }
    if n == 0 || dim == 0 {
        return Err(fail(ElecdynStatus::InvalidArgument, "n and dim must be positive"));
    }
    let len = n.checked_mul(dim).ok_or_else(|| fail(ElecdynStatus::InvalidArgument, "n * dim overflows"))?;
    let data = std::slice::from_raw_parts(points, len).to_vec();
    PointSet::from_flat(dim, data).map_err(from_error)
}

/// Message for the last failure on this thread, or an empty string. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn elecdyn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn elecdyn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML run configuration, simulates it and stores the result in `*out`.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_from_toml(config_toml: *const c_char, out: *mut *mut ElecdynRun) -> ElecdynStatus {
    guard(|| {
        if config_toml.is_null() || out.is_null() {
            return fail(ElecdynStatus::NullPointer, "config_toml and out must be non-null");
        }
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(config_toml).to_str() {
            Ok(t) => t,
            Err(_) => return fail(ElecdynStatus::InvalidArgument, "configuration is not valid UTF-8"),
        };
        let output = match RunConfig::from_toml(text).and_then(|cfg| run_simulation(&cfg)) {
            Ok(o) => o,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(ElecdynRun { output }));
        ElecdynStatus::Ok
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle from [`elecdyn_run_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_free(run: *mut ElecdynRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded rounds (`rounds + 1`, round 0 included).
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_len(run: *const ElecdynRun, out: *mut usize) -> ElecdynStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(ElecdynStatus::NullPointer, "run and out must be non-null");
        }
        *out = (*run).output.records.len();
        ElecdynStatus::Ok
    })
}

/// Copies one metric series into `dest`, which must hold at least
/// [`elecdyn_run_len`] values.
///
/// # Safety
/// `run` must be a live handle; `dest` must be valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_metric(
    run: *const ElecdynRun,
    metric: ElecdynMetric,
    dest: *mut f64,
    capacity: usize,
) -> ElecdynStatus {
    guard(|| {
        if run.is_null() || dest.is_null() {
            return fail(ElecdynStatus::NullPointer, "run and dest must be non-null");
        }
        let records = &(*run).output.records;
        if capacity < records.len() {
            return fail(ElecdynStatus::OutOfRange, "destination too small for the series");
        }
        let dest = std::slice::from_raw_parts_mut(dest, records.len());
        for (d, r) in dest.iter_mut().zip(records) {
            *d = metric.read(r);
        }
        ElecdynStatus::Ok
    })
}

/// Copies the winner of round `t` into `dest` (`dim` coordinates).
///
/// # Safety
/// `run` must be a live handle; `dest` must be valid for `dim` writes.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_winner(
    run: *const ElecdynRun,
    t: usize,
    dest: *mut f64,
    dim: usize,
) -> ElecdynStatus {
    guard(|| {
        if run.is_null() || dest.is_null() {
            return fail(ElecdynStatus::NullPointer, "run and dest must be non-null");
        }
        let records = &(*run).output.records;
        let Some(rec) = records.get(t) else {
            return fail(ElecdynStatus::OutOfRange, "round index past the end of the run");
        };
        if dim != rec.winner.len() {
            return fail(ElecdynStatus::InvalidArgument, "dim does not match the policy space");
        }
        std::slice::from_raw_parts_mut(dest, dim).copy_from_slice(&rec.winner);
        ElecdynStatus::Ok
    })
}

/// Checks the voter contraction bound on a noiseless run. Returns
/// [`ElecdynStatus::Refused`] for noisy runs.
///
/// # Safety
/// `run` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_run_check_voter_bound(
    run: *const ElecdynRun,
    satisfied: *mut bool,
    max_violation: *mut f64,
) -> ElecdynStatus {
    guard(|| {
        if run.is_null() || satisfied.is_null() || max_violation.is_null() {
            return fail(ElecdynStatus::NullPointer, "arguments must be non-null");
        }
        let output = &(*run).output;
        match check_voter_bound(&output.records, &output.params) {
            Ok(report) => {
                *satisfied = report.all_satisfied;
                *max_violation = report.max_violation;
                ElecdynStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Empirical variance of `n` points in `dim` dimensions (row-major).
///
/// # Safety
/// `points` must be valid for `n * dim` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_pairwise_variance(
    points: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> ElecdynStatus {
    guard(|| {
        if out.is_null() {
            return fail(ElecdynStatus::NullPointer, "out is null");
        }
        let set = match point_set(points, n, dim) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match pairwise_variance(&set) {
            Ok(v) => {
                *out = v;
                ElecdynStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Largest distance from `w` to any of the points.
///
/// # Safety
/// `points` must be valid for `n * dim` reads, `w` for `dim` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_winner_radius(
    points: *const f64,
    n: usize,
    dim: usize,
    w: *const f64,
    out: *mut f64,
) -> ElecdynStatus {
    guard(|| {
        if w.is_null() || out.is_null() {
            return fail(ElecdynStatus::NullPointer, "w and out must be non-null");
        }
        let set = match point_set(points, n, dim) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match winner_radius(&set, std::slice::from_raw_parts(w, dim)) {
            Ok(v) => {
                *out = v;
                ElecdynStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Point of the box `[lo, hi]` minimizing the largest distance to the points.
///
/// # Safety
/// `points` must be valid for `n * dim` reads; `lo`, `hi` for `dim` reads;
/// `center` for `dim` writes and `radius` for one write.
#[no_mangle]
pub unsafe extern "C" fn elecdyn_chebyshev_center(
    points: *const f64,
    n: usize,
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    center: *mut f64,
    radius: *mut f64,
) -> ElecdynStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() || center.is_null() || radius.is_null() {
            return fail(ElecdynStatus::NullPointer, "box and output pointers must be non-null");
        }
        let set = match point_set(points, n, dim) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let bx = match PolicyBox::new(
            Point(std::slice::from_raw_parts(lo, dim).to_vec()),
            Point(std::slice::from_raw_parts(hi, dim).to_vec()),
        ) {
            Ok(b) => b,
            Err(e) => return from_error(e),
        };
        match chebyshev_center(&set, &bx) {
            Ok(c) => {
                std::slice::from_raw_parts_mut(center, dim).copy_from_slice(&c.center);
                *radius = c.radius;
                ElecdynStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
