//! C interface to the `fmm-ecg` beat fitter.
//!
//! Objects are opaque and owned by the caller once returned; each has a
//! matching `*_free`. Functions report failure through [`FmmStatus`] and
//! leave a message for [`fmm_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fmm_ecg::metrics::{summarize, DetectionCounts};
use fmm_ecg::{fit_beat, Beat, Error, FitReport, IStepConfig, WaveLabel, WaveParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unfittable = 3,
    AbsentWave = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

/// Identification thresholds.
pub struct FmmConfig(IStepConfig);

/// One beat on the phase axis.
pub struct FmmBeat(Beat);

/// Result of fitting one beat.
pub struct FmmFitReport(FitReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmWave {
    pub amplitude: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
}

/// Percentages rounded to two decimals. A ratio whose denominator is zero
/// is reported as NaN with its `*_defined` flag cleared.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmSummary {
    pub se: f64,
    pub ppv: f64,
    pub der: f64,
    pub f1: f64,
    pub se_defined: bool,
    pub ppv_defined: bool,
    pub der_defined: bool,
    pub f1_defined: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FmmStatus {
    match e {
        Error::Unfittable => FmmStatus::Unfittable,
        Error::AbsentWave(_) => FmmStatus::AbsentWave,
        Error::Io(_) => FmmStatus::Io,
        Error::Config { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => FmmStatus::Parse,
        _ => FmmStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FmmStatus, String)>) -> FmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FmmStatus::Panic
        }
    }
}

fn fail(e: Error) -> (FmmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FmmStatus, String) {
    (FmmStatus::NullPointer, format!("{what} is null"))
}

fn to_wave(w: *const FmmWave) -> Result<WaveParams, (FmmStatus, String)> {
    // SAFETY: caller passes a valid pointer or null
    let w = unsafe { w.as_ref() }.ok_or_else(|| null("wave"))?;
    WaveParams::new(w.amplitude, w.alpha, w.beta, w.omega).map_err(fail)
}

fn from_wave(w: &WaveParams) -> FmmWave {
    FmmWave {
        amplitude: w.amplitude,
        alpha: w.alpha,
        beta: w.beta,
        omega: w.omega,
    }
}

fn write<T>(out: *mut T, v: T) -> Result<(), (FmmStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: non-null and writable by contract
    unsafe { out.write(v) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fmm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Value of one wave at phase `t`.
#[no_mangle]
pub extern "C" fn fmm_eval_wave(wave: *const FmmWave, t: f64, out: *mut f64) -> FmmStatus {
    guard(|| write(out, to_wave(wave)?.eval(t)))
}

/// Phase in [0, 2π) of the wave's maximum.
#[no_mangle]
pub extern "C" fn fmm_crest_time(wave: *const FmmWave, out: *mut f64) -> FmmStatus {
    guard(|| write(out, to_wave(wave)?.crest_time()))
}

/// Phase in [0, 2π) of the wave's minimum.
#[no_mangle]
pub extern "C" fn fmm_trough_time(wave: *const FmmWave, out: *mut f64) -> FmmStatus {
    guard(|| write(out, to_wave(wave)?.trough_time()))
}

/// Default thresholds. Never null.
#[no_mangle]
pub extern "C" fn fmm_config_new() -> *mut FmmConfig {
    Box::into_raw(Box::new(FmmConfig(IStepConfig::default())))
}

/// Defaults overridden by the `key = value` lines of a file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fmm_config_from_file(path: *const c_char, out: *mut *mut FmmConfig) -> FmmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| (FmmStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let cfg = IStepConfig::from_file(path).map_err(fail)?;
        cfg.validate().map_err(fail)?;
        write(out, Box::into_raw(Box::new(FmmConfig(cfg))))
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fmm_config_free(cfg: *mut FmmConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Copies `n` phases and voltages into a new beat.
///
/// # Safety
/// `times` and `values` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn fmm_beat_new(
    times: *const f64,
    values: *const f64,
    n: usize,
    fs: f64,
    qrs_phase: f64,
    out: *mut *mut FmmBeat,
) -> FmmStatus {
    guard(|| {
        if times.is_null() || values.is_null() {
            return Err(null("times or values"));
        }
        let (t, v) = unsafe { (std::slice::from_raw_parts(times, n), std::slice::from_raw_parts(values, n)) };
        let beat = Beat::new(t.to_vec(), v.to_vec(), fs, qrs_phase).map_err(fail)?;
        write(out, Box::into_raw(Box::new(FmmBeat(beat))))
    })
}

/// # Safety
/// `beat` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fmm_beat_free(beat: *mut FmmBeat) {
    if !beat.is_null() {
        drop(unsafe { Box::from_raw(beat) });
    }
}

/// Fits the five-wave model. A null `cfg` means the defaults.
///
/// # Safety
/// Pointers must come from this library and be live.
#[no_mangle]
pub unsafe extern "C" fn fmm_fit_beat(
    beat: *const FmmBeat,
    cfg: *const FmmConfig,
    out: *mut *mut FmmFitReport,
) -> FmmStatus {
    guard(|| {
        let beat = unsafe { beat.as_ref() }.ok_or_else(|| null("beat"))?;
        let default;
        let cfg = match unsafe { cfg.as_ref() } {
            Some(c) => &c.0,
            None => {
                default = IStepConfig::default();
                &default
            }
        };
        let report = fit_beat(&beat.0, cfg).map_err(fail)?;
        write(out, Box::into_raw(Box::new(FmmFitReport(report))))
    })
}

/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_free(report: *mut FmmFitReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// R² of the fit, NaN for a null report.
///
/// # Safety
/// `report` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_r2(report: *const FmmFitReport) -> f64 {
    unsafe { report.as_ref() }.map_or(f64::NAN, |r| r.0.r2)
}

/// Intercept M, NaN for a null report.
///
/// # Safety
/// `report` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_intercept(report: *const FmmFitReport) -> f64 {
    unsafe { report.as_ref() }.map_or(f64::NAN, |r| r.0.params.intercept)
}

/// Whether all five waves were identified.
///
/// # Safety
/// `report` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_converged(report: *const FmmFitReport) -> bool {
    unsafe { report.as_ref() }.is_some_and(|r| r.0.converged)
}

/// Parameters of wave `label` (0..=4 for P, Q, R, S, T).
///
/// # Safety
/// `report` must be live.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_wave(report: *const FmmFitReport, label: u32, out: *mut FmmWave) -> FmmStatus {
    guard(|| {
        let report = unsafe { report.as_ref() }.ok_or_else(|| null("report"))?;
        let label = *WaveLabel::ALL
            .get(label as usize)
            .ok_or_else(|| (FmmStatus::InvalidArgument, format!("wave label {label} out of range 0..=4")))?;
        let w = report.0.params.waves.get(label).ok_or_else(|| fail(Error::AbsentWave(label)))?;
        write(out, from_wave(w))
    })
}

/// The whole report as JSON. Release with [`fmm_string_free`].
///
/// # Safety
/// `report` must be live.
#[no_mangle]
pub unsafe extern "C" fn fmm_report_to_json(report: *const FmmFitReport, out: *mut *mut c_char) -> FmmStatus {
    guard(|| {
        let report = unsafe { report.as_ref() }.ok_or_else(|| null("report"))?;
        let json = serde_json::to_string(&report.0).map_err(|e| fail(e.into()))?;
        let s = CString::new(json).map_err(|e| (FmmStatus::Panic, e.to_string()))?;
        write(out, s.into_raw())
    })
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fmm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Se, PPV, DER and F1 of the given counts.
#[no_mangle]
pub extern "C" fn fmm_summarize(tp: u64, fp: u64, fn_: u64, out: *mut FmmSummary) -> FmmStatus {
    guard(|| {
        let s = summarize(&DetectionCounts::new(tp, fp, fn_));
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        write(
            out,
            FmmSummary {
                se: v(s.se),
                ppv: v(s.ppv),
                der: v(s.der),
                f1: v(s.f1),
                se_defined: s.se.is_some(),
                ppv_defined: s.ppv.is_some(),
                der_defined: s.der.is_some(),
                f1_defined: s.f1.is_some(),
            },
        )
    })
}
