//! C ABI over the sentry-bench library.
//!
//! Every fallible function returns an [`SbStatus`]; on failure the message
//! is kept per thread and read back with [`sb_last_error_message`].
//! Models, datasets and reports are opaque handles created by a `*_load` or
//! `*_run` function and released with the matching `*_free`. Undefined
//! metric values come back as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sentry_bench::bench::config::parse_settings;
use sentry_bench::bench::{execute, load_source, report, ExperimentConfig, ModelBundle, RunReport};
use sentry_bench::kdd::{read_records, BinaryClass, Dataset, LabelMap, LabelMode};
use sentry_bench::metrics::{roc_curve, ConfusionCounts, MetricsReport};
use sentry_bench::rbm::RbmStack;
use sentry_bench::wsn::trust_aggregate;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Bad configuration or argument.
    InvalidInput = 3,
    /// Unreadable, malformed or unusable data.
    DataError = 4,
    /// Numerical or model failure.
    ComputeError = 5,
    /// The output buffer cannot hold the value; the needed size was reported.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("null pointer passed for {0}")]
    Null(&'static str),
    #[error("{0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("buffer of {capacity} bytes cannot hold {needed}")]
    BufferTooSmall { needed: usize, capacity: usize },
    #[error(transparent)]
    Core(#[from] sentry_bench::Error),
}

impl FfiError {
    fn status(&self) -> SbStatus {
        match self {
            FfiError::Null(_) => SbStatus::NullArgument,
            FfiError::Utf8(_) => SbStatus::InvalidUtf8,
            FfiError::BufferTooSmall { .. } => SbStatus::BufferTooSmall,
            FfiError::Core(e) => match e.exit_code() {
                1 => SbStatus::InvalidInput,
                2 => SbStatus::DataError,
                _ => SbStatus::ComputeError,
            },
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            SbStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            SbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(what))
}

/// Copies `s` plus a NUL into `buf`. `needed` always receives the length
/// without the NUL, so a caller can size the buffer with a first call.
unsafe fn copy_text(s: &str, buf: *mut c_char, capacity: usize, needed: *mut usize) -> Result<(), FfiError> {
    if let Some(n) = needed.as_mut() {
        *n = s.len();
    }
    if buf.is_null() || capacity <= s.len() {
        return Err(FfiError::BufferTooSmall {
            needed: s.len() + 1,
            capacity,
        });
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message (empty after a success).
///
/// # Safety
/// `buf` must be null or point to `capacity` writable bytes; `needed` must
/// be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sb_last_error_message(buf: *mut c_char, capacity: usize, needed: *mut usize) -> SbStatus {
    let message = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_text(&message, buf, capacity, needed) {
        Ok(()) => SbStatus::Ok,
        Err(e) => e.status(),
    }
}

// Metrics

/// All rate metrics of one evaluation; NaN where undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbMetrics {
    pub ar: f64,
    pub dr: f64,
    pub fnr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

impl From<&MetricsReport> for SbMetrics {
    fn from(m: &MetricsReport) -> Self {
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        SbMetrics {
            ar: v(m.ar),
            dr: v(m.dr),
            fnr: v(m.fnr),
            precision: v(m.precision),
            recall: v(m.recall),
            f1: v(m.f1),
            auc: v(m.auc),
        }
    }
}

/// Metrics from confusion counts; `auc` is NaN.
///
/// # Safety
/// `metrics` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_metrics_from_counts(
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
    metrics: *mut SbMetrics,
) -> SbStatus {
    guard(|| {
        let counts = ConfusionCounts { tp, fp, tn, fn_ };
        *out(metrics, "metrics")? = SbMetrics::from(&MetricsReport::from_counts(counts, None));
        Ok(())
    })
}

/// Area under the ROC curve; higher scores mean more intrusive and a
/// nonzero `intrusive[i]` marks an intrusive record.
///
/// # Safety
/// `scores` and `intrusive` must each hold `len` elements; `auc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_roc_auc(scores: *const f64, intrusive: *const u8, len: usize, auc: *mut f64) -> SbStatus {
    guard(|| {
        let scores = slice(scores, len, "scores")?;
        let truth = slice(intrusive, len, "intrusive")?;
        let scored: Vec<(f64, BinaryClass)> = scores
            .iter()
            .zip(truth)
            .map(|(&s, &t)| (s, BinaryClass::from_intrusive(t != 0)))
            .collect();
        *out(auc, "auc")? = roc_curve(&scored)?.auc;
        Ok(())
    })
}

/// Cluster-head trust from member trusts and pairwise member-to-head trusts.
///
/// # Safety
/// Both arrays must hold `len` elements; `trust` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_trust_aggregate(
    member_trust: *const f64,
    pairwise_trust: *const f64,
    len: usize,
    trust: *mut f64,
) -> SbStatus {
    guard(|| {
        let members = slice(member_trust, len, "member_trust")?;
        let pairwise = slice(pairwise_trust, len, "pairwise_trust")?;
        *out(trust, "trust")? = trust_aggregate(members, pairwise)?;
        Ok(())
    })
}

// Datasets

/// An encoded KDD-format file.
pub struct SbDataset(Dataset);

/// Parses and encodes a KDD-format file. `labels` is `strict`, `lenient`
/// or `lenient:<group>`; with `normalize` nonzero features are min-max
/// scaled to [0, 1] using the file's own bounds.
///
/// # Safety
/// `path` and `labels` must be NUL-terminated strings; `dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_load(
    path: *const c_char,
    labels: *const c_char,
    normalize: u8,
    dataset: *mut *mut SbDataset,
) -> SbStatus {
    guard(|| {
        let slot = out(dataset, "dataset")?;
        let path = PathBuf::from(text(path, "path")?);
        let mode: LabelMode = text(labels, "labels")?.parse()?;
        let (records, mut report) = read_records(&path)?;
        let mut data = Dataset::from_records(&records, &LabelMap::new(mode), None, &mut report)?;
        if normalize != 0 {
            let bounds = data.fit_normalizer()?;
            data.normalize(&bounds)?;
        }
        *slot = Box::into_raw(Box::new(SbDataset(data)));
        Ok(())
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_len(dataset: *const SbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Features per row; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_width(dataset: *const SbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.width())
}

/// Copies row `index` into `features` (`capacity` values) and writes 1 to
/// `intrusive` for an attack, 0 for normal traffic.
///
/// # Safety
/// `dataset` must be a live handle, `features` must hold `capacity` values
/// and `intrusive` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_row(
    dataset: *const SbDataset,
    index: usize,
    features: *mut f64,
    capacity: usize,
    intrusive: *mut u8,
) -> SbStatus {
    guard(|| {
        let data = &handle(dataset, "dataset")?.0;
        let row = data.rows.get(index).ok_or_else(|| {
            sentry_bench::Error::InvalidArgument(format!("row {index} out of range for {} rows", data.len()))
        })?;
        if features.is_null() || capacity < row.features.len() {
            return Err(FfiError::BufferTooSmall {
                needed: row.features.len(),
                capacity,
            });
        }
        ptr::copy_nonoverlapping(row.features.as_ptr(), features, row.features.len());
        *out(intrusive, "intrusive")? = u8::from(row.truth.is_intrusive());
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_free(dataset: *mut SbDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// Saved models

/// A trained detector with its encoding and normalizer, as written by
/// `sentry-bench train`.
pub struct SbModel(ModelBundle);

/// # Safety
/// `path` must be a NUL-terminated string; `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_model_load(path: *const c_char, model: *mut *mut SbModel) -> SbStatus {
    guard(|| {
        let slot = out(model, "model")?;
        let bundle = ModelBundle::load(&PathBuf::from(text(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SbModel(bundle)));
        Ok(())
    })
}

/// Copies the detector name (`asch`, `rbc`, `ql`, `sarsa` or `td`).
///
/// # Safety
/// `model` must be a live handle; see [`sb_last_error_message`] for the buffer rules.
#[no_mangle]
pub unsafe extern "C" fn sb_model_detector(
    model: *const SbModel,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> SbStatus {
    guard(|| copy_text(handle(model, "model")?.0.detector.kind().as_str(), buf, capacity, needed))
}

/// Classifies one KDD-format line (label field included, ignored).
/// `intrusive` receives the verdict and `score` its confidence that the
/// record is an attack. The hybrid detector needs whole batches and is
/// rejected with `InvalidInput`.
///
/// # Safety
/// `model` must be a live handle, `line` a NUL-terminated string and both
/// outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sb_model_classify_line(
    model: *const SbModel,
    line: *const c_char,
    intrusive: *mut u8,
    score: *mut f64,
) -> SbStatus {
    guard(|| {
        let (verdict, s) = handle(model, "model")?.0.classify_line(text(line, "line")?)?;
        *out(intrusive, "intrusive")? = u8::from(verdict.is_intrusive());
        *out(score, "score")? = s;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_model_free(model: *mut SbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// RBM stacks

/// A stacked RBM classifier saved as JSON.
pub struct SbRbmStack(RbmStack);

/// # Safety
/// `path` must be a NUL-terminated string; `stack` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_rbm_load(path: *const c_char, stack: *mut *mut SbRbmStack) -> SbStatus {
    guard(|| {
        let slot = out(stack, "stack")?;
        let loaded = RbmStack::load_json(&PathBuf::from(text(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SbRbmStack(loaded)));
        Ok(())
    })
}

/// Input width of the first layer; 0 for a null handle.
///
/// # Safety
/// `stack` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_rbm_input_width(stack: *const SbRbmStack) -> usize {
    stack.as_ref().map_or(0, |s| s.0.input_width())
}

/// P(intrusive) for one normalized feature vector.
///
/// # Safety
/// `stack` must be a live handle, `features` must hold `len` values and
/// `p_intrusive` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_rbm_classify(
    stack: *const SbRbmStack,
    features: *const f64,
    len: usize,
    p_intrusive: *mut f64,
) -> SbStatus {
    guard(|| {
        let stack = &handle(stack, "stack")?.0;
        let (p, _) = stack.classify(slice(features, len, "features")?)?;
        *out(p_intrusive, "p_intrusive")? = p;
        Ok(())
    })
}

/// # Safety
/// `stack` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_rbm_free(stack: *mut SbRbmStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

// Experiments

/// Per-run and aggregated metrics of one experiment.
pub struct SbReport(RunReport);

/// Runs an experiment described by `key = value` lines (the configuration
/// file format; empty text means all defaults). Nothing is written to disk
/// until [`sb_report_write`].
///
/// # Safety
/// `config` must be a NUL-terminated string; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_experiment_run(config: *const c_char, report: *mut *mut SbReport) -> SbStatus {
    guard(|| {
        let slot = out(report, "report")?;
        let cfg = ExperimentConfig::from_settings(&parse_settings(text(config, "config")?)?)?;
        let result = execute(&cfg, &load_source(&cfg)?)?;
        *slot = Box::into_raw(Box::new(SbReport(result)));
        Ok(())
    })
}

/// Number of runs in the report; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_report_runs(report: *const SbReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.runs.len())
}

/// Mean and 95% half-width of `metric` (`ar`, `dr`, `fnr`, `precision`,
/// `recall`, `f1` or `auc`) over the runs; NaN where undefined.
///
/// # Safety
/// `report` must be a live handle, `metric` a NUL-terminated string and
/// both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sb_report_metric(
    report: *const SbReport,
    metric: *const c_char,
    mean: *mut f64,
    half_width: *mut f64,
) -> SbStatus {
    guard(|| {
        let report = &handle(report, "report")?.0;
        let name = text(metric, "metric")?;
        let a = report.aggregate.get(name).ok_or_else(|| {
            sentry_bench::Error::InvalidArgument(format!(
                "unknown metric \"{name}\"; valid options: {}",
                report::METRICS.join(", ")
            ))
        })?;
        *out(mean, "mean")? = a.mean.unwrap_or(f64::NAN);
        *out(half_width, "half_width")? = a.half_width.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Metrics of run `index`.
///
/// # Safety
/// `report` must be a live handle and `metrics` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_report_run_metrics(
    report: *const SbReport,
    index: usize,
    metrics: *mut SbMetrics,
) -> SbStatus {
    guard(|| {
        let report = &handle(report, "report")?.0;
        let run = report.runs.get(index).ok_or_else(|| {
            sentry_bench::Error::InvalidArgument(format!("run {index} out of range for {} runs", report.runs.len()))
        })?;
        *out(metrics, "metrics")? = SbMetrics::from(&run.metrics);
        Ok(())
    })
}

/// Copies the report as the JSON written to `metrics.json`.
///
/// # Safety
/// `report` must be a live handle; see [`sb_last_error_message`] for the buffer rules.
#[no_mangle]
pub unsafe extern "C" fn sb_report_json(
    report: *const SbReport,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> SbStatus {
    guard(|| {
        let json = serde_json::to_string_pretty(&handle(report, "report")?.0).map_err(sentry_bench::Error::from)?;
        copy_text(&json, buf, capacity, needed)
    })
}

/// Writes the report files into directory `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sb_report_write(report: *const SbReport, dir: *const c_char) -> SbStatus {
    guard(|| {
        let report = &handle(report, "report")?.0;
        report::write_experiment(&PathBuf::from(text(dir, "dir")?), report)?;
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_report_free(report: *mut SbReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
