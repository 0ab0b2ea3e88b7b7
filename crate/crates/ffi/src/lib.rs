//! C ABI over `wigner_clt`.
//!
//! Every fallible function returns a [`WcltStatus`]; on failure the message
//! is available from [`wclt_last_error`] on the same thread. Experiments,
//! estimates and reports are opaque handles released with their `_free`
//! function. Panics are caught at the boundary and reported as
//! `WCLT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wigner_clt::config::{parse_experiment, presets, Experiment, ExperimentConfig, Overrides};
use wigner_clt::entry_process::Beta;
use wigner_clt::kernel::{green_halfplane, kernel_value, UpperHalfPlanePoint};
use wigner_clt::montecarlo::compare::{compare, theory_table, ComparisonReport};
use wigner_clt::montecarlo::{run_experiment, EstimateTable, RunOptions};
use wigner_clt::theory::{
    chebyshev_covariance_closed, chebyshev_covariance_expanded, covariance_contour, covariance_logkernel,
    covariance_series, CovarianceQuery, QuadratureParams,
};
use wigner_clt::Error;

/// Status codes; the values match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcltStatus {
    Ok = 0,
    VerdictFailure = 1,
    Usage = 2,
    Config = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcltMethod {
    Series = 0,
    Contour = 1,
    LogKernel = 2,
    ChebyshevClosed = 3,
    ChebyshevExpanded = 4,
}

/// Parameters of one limiting covariance entry; `beta` is 1 or 2.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct WcltCovarianceQuery {
    pub k_p: u32,
    pub k_q: u32,
    pub b_p: f64,
    pub b_q: f64,
    pub b_pq: f64,
    pub c: f64,
    pub beta: u8,
}

/// A validated experiment.
pub struct WcltExperiment {
    config: ExperimentConfig,
    resolved: Experiment,
    labels: Vec<CString>,
}

/// Moment estimates of a finished run.
pub struct WcltEstimates {
    table: EstimateTable,
    runtime_seconds: f64,
}

/// Result of comparing estimates with the limit.
pub struct WcltReport {
    report: ComparisonReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WcltStatus {
    match e.exit_code() {
        1 => WcltStatus::VerdictFailure,
        2 => WcltStatus::Usage,
        3 => WcltStatus::Config,
        _ => WcltStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> WcltStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WcltStatus::Ok,
        Ok(Err(e)) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            WcltStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error::Usage(format!("{what} is a null pointer"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Error> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Error::Usage(format!("{what} holds {len} values, {need} required")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Error::Usage(format!("{what} is not UTF-8: {e}")))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wclt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wclt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Limiting covariance of one query by the chosen evaluator, with the
/// default quadrature.
///
/// # Safety
/// `query` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wclt_covariance(
    query: *const WcltCovarianceQuery,
    method: WcltMethod,
    out: *mut f64,
) -> WcltStatus {
    wclt_covariance_with_quadrature(query, method, 512, 0.25, out)
}

/// As [`wclt_covariance`] with explicit quadrature nodes and contour shrink.
///
/// # Safety
/// `query` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wclt_covariance_with_quadrature(
    query: *const WcltCovarianceQuery,
    method: WcltMethod,
    n_nodes: usize,
    delta: f64,
    out: *mut f64,
) -> WcltStatus {
    guard(|| {
        let q = borrow(query, "query")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let beta = Beta::try_from(q.beta).map_err(|_| Error::InvalidQuery(format!("beta = {}", q.beta)))?;
        let q = CovarianceQuery {
            k_p: q.k_p,
            k_q: q.k_q,
            b_p: q.b_p,
            b_q: q.b_q,
            b_pq: q.b_pq,
            c: q.c,
            beta,
        };
        let quad = QuadratureParams { n_nodes, delta };
        *out = match method {
            WcltMethod::Series => covariance_series(&q)?,
            WcltMethod::Contour => covariance_contour(&q, &quad)?,
            WcltMethod::LogKernel => covariance_logkernel(&q, &quad)?,
            WcltMethod::ChebyshevClosed => chebyshev_covariance_closed(&q)?,
            WcltMethod::ChebyshevExpanded => chebyshev_covariance_expanded(&q)?,
        };
        Ok(())
    })
}

/// Space-time kernel at a precomputed `c = c(s, t)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_kernel(z_re: f64, z_im: f64, w_re: f64, w_im: f64, c: f64, out: *mut f64) -> WcltStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let z = UpperHalfPlanePoint::from_parts(z_re, z_im)?;
        let w = UpperHalfPlanePoint::from_parts(w_re, w_im)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Domain(format!("c = {c} must lie in [0, 1]")));
        }
        *out = kernel_value(z.z(), w.z(), c);
        Ok(())
    })
}

/// Dirichlet Green function of the upper half-plane.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_green(z_re: f64, z_im: f64, w_re: f64, w_im: f64, out: *mut f64) -> WcltStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = green_halfplane(
            UpperHalfPlanePoint::from_parts(z_re, z_im)?,
            UpperHalfPlanePoint::from_parts(w_re, w_im)?,
        );
        Ok(())
    })
}

fn make_experiment(config: ExperimentConfig) -> Result<Box<WcltExperiment>, Error> {
    let resolved = config.resolve()?;
    let labels = resolved
        .labels()
        .into_iter()
        .map(|l| CString::new(l).unwrap_or_default())
        .collect();
    Ok(Box::new(WcltExperiment { config, resolved, labels }))
}

/// Parse and validate an experiment from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_from_json(json: *const c_char, out: *mut *mut WcltExperiment) -> WcltStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = Box::into_raw(make_experiment(parse_experiment(text(json, "json")?)?)?);
        Ok(())
    })
}

/// Load a built-in preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_from_preset(name: *const c_char, out: *mut *mut WcltExperiment) -> WcltStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let name = text(name, "name")?;
        let json = presets::experiment(name).ok_or_else(|| Error::Usage(format!("unknown preset \"{name}\"")))?;
        *out = Box::into_raw(make_experiment(parse_experiment(json)?)?);
        Ok(())
    })
}

/// Override seed, sample count and scale; zero leaves a value unchanged.
///
/// # Safety
/// `exp` must come from `wclt_experiment_from_*`.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_override(
    exp: *mut WcltExperiment,
    seed: u64,
    n_samples: usize,
    scale: f64,
) -> WcltStatus {
    guard(|| {
        let e = exp.as_mut().ok_or_else(|| null("experiment"))?;
        let mut config = e.config.clone();
        config.apply(&Overrides {
            seed: (seed != 0).then_some(seed),
            n_samples: (n_samples != 0).then_some(n_samples),
            scale: (scale != 0.0).then_some(scale),
        });
        *e = *make_experiment(config)?;
        Ok(())
    })
}

/// Release an experiment; null is ignored.
///
/// # Safety
/// `exp` must come from `wclt_experiment_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_free(exp: *mut WcltExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of observables, or 0 for a null handle.
///
/// # Safety
/// `exp` must be null or a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_observable_count(exp: *const WcltExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.labels.len())
}

/// Label of observable `index`, owned by the handle; null when out of range.
///
/// # Safety
/// `exp` must be null or a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_label(exp: *const WcltExperiment, index: usize) -> *const c_char {
    exp.as_ref()
        .and_then(|e| e.labels.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Limiting covariance matrix (row-major `m x m`) by the default evaluator
/// of each pair.
///
/// # Safety
/// `exp` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wclt_experiment_theory(exp: *const WcltExperiment, out: *mut f64, len: usize) -> WcltStatus {
    guard(|| {
        let e = borrow(exp, "experiment")?;
        let m = e.labels.len();
        let out = out_slice(out, len, m * m, "out")?;
        for t in theory_table(&e.resolved, None)? {
            out[t.p * m + t.q] = t.value;
            out[t.q * m + t.p] = t.value;
        }
        Ok(())
    })
}

/// Run the Monte Carlo experiment; `threads == 0` uses all cores.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_simulate(exp: *const WcltExperiment, threads: usize, out: *mut *mut WcltEstimates) -> WcltStatus {
    guard(|| {
        let e = borrow(exp, "experiment")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = RunOptions {
            threads: (threads != 0).then_some(threads),
            ..Default::default()
        };
        let run = run_experiment(&e.resolved, &opts)?;
        *out = Box::into_raw(Box::new(WcltEstimates {
            table: run.estimates,
            runtime_seconds: run.runtime_seconds,
        }));
        Ok(())
    })
}

/// Number of samples that entered the estimates, or 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live estimates handle.
#[no_mangle]
pub unsafe extern "C" fn wclt_estimates_n_used(est: *const WcltEstimates) -> usize {
    est.as_ref().map_or(0, |e| e.table.n_used)
}

/// Empirical covariances and their jackknife standard errors, row-major.
/// Either output may be null.
///
/// # Safety
/// `est` must be a live handle; non-null outputs must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wclt_estimates_covariance(
    est: *const WcltEstimates,
    values: *mut f64,
    stderrs: *mut f64,
    len: usize,
) -> WcltStatus {
    guard(|| {
        let e = borrow(est, "estimates")?;
        let need = e.table.covariance.len();
        if !values.is_null() {
            for (o, c) in out_slice(values, len, need, "values")?.iter_mut().zip(&e.table.covariance) {
                *o = c.value;
            }
        }
        if !stderrs.is_null() {
            for (o, c) in out_slice(stderrs, len, need, "stderrs")?.iter_mut().zip(&e.table.covariance) {
                *o = c.stderr;
            }
        }
        Ok(())
    })
}

/// Release estimates; null is ignored.
///
/// # Safety
/// `est` must come from [`wclt_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wclt_estimates_free(est: *mut WcltEstimates) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Compare estimates with the limit of the same experiment.
///
/// # Safety
/// `exp` and `est` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_compare(
    exp: *const WcltExperiment,
    est: *const WcltEstimates,
    out: *mut *mut WcltReport,
) -> WcltStatus {
    guard(|| {
        let e = borrow(exp, "experiment")?;
        let s = borrow(est, "estimates")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let report = compare(&s.table, &e.resolved, s.runtime_seconds)?;
        *out = Box::into_raw(Box::new(WcltReport { report }));
        Ok(())
    })
}

/// 1 when every verdict passed, 0 otherwise (including null).
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn wclt_report_passed(report: *const WcltReport) -> i32 {
    report.as_ref().map_or(0, |r| r.report.passed as i32)
}

/// Largest `|z|` over the covariance entries; NaN for null.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn wclt_report_max_abs_z(report: *const WcltReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| {
        r.report.pairs.iter().map(|p| p.z.abs()).fold(0.0, f64::max)
    })
}

/// Report as JSON; free the string with [`wclt_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_report_to_json(report: *const WcltReport, out: *mut *mut c_char) -> WcltStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = serde_json::to_string(&r.report)?;
        *out = CString::new(s).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Release a report; null is ignored.
///
/// # Safety
/// `report` must come from [`wclt_compare`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wclt_report_free(report: *mut WcltReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wclt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run the deterministic identity suite. Returns `WCLT_STATUS_VERDICT_FAILURE`
/// when any identity fails; `identities` (optional) receives the count.
///
/// # Safety
/// `identities` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wclt_selftest(identities: *mut usize) -> WcltStatus {
    let mut failed = Vec::new();
    let status = guard(|| {
        let r = wigner_clt::selftest::run_selftest()?;
        if let Some(n) = identities.as_mut() {
            *n = r.identities();
        }
        failed = r.checks.into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Ok(())
    });
    if status == WcltStatus::Ok && !failed.is_empty() {
        set_error(format!("failed identities: {}", failed.join(", ")));
        return WcltStatus::VerdictFailure;
    }
    status
}
