//! C ABI over the `biascal` library.
//!
//! Every fallible function returns a [`BiascalStatus`]; on failure a
//! message is available from [`biascal_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use biascal::backend::{
    score_labels, Backend, CachedBackend, MockBackend, RemoteBackend, RemoteOptions,
};
use biascal::calibration::{argmax, calibrated_argmax};
use biascal::config::RunFile;
use biascal::dataset::LabelSet;
use biascal::harness::{run_eval, write_eval_report};
use biascal::metrics::{bias_from_priors, macro_f1, pearson};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiascalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Backend = 4,
    Calibration = 5,
    Config = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Label names in label order.
pub struct BiascalLabelSet(LabelSet);

/// A scoring backend (mock or remote, optionally cached).
pub struct BiascalBackend(Arc<dyn Backend>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(BiascalStatus, String);

impl Fail {
    fn arg(msg: impl Into<String>) -> Self {
        Fail(BiascalStatus::InvalidArgument, msg.into())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BiascalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BiascalStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BiascalStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(BiascalStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(BiascalStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(BiascalStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(BiascalStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn biascal_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn biascal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a label set from `n` NUL-terminated names.
///
/// # Safety
/// `names` must point to `n` valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_label_set_new(
    names: *const *const c_char,
    n: usize,
    out: *mut *mut BiascalLabelSet,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ptrs = slice_arg(names, n, "names")?;
        let names = ptrs
            .iter()
            .map(|&p| str_arg(p, "label name"))
            .collect::<Result<Vec<_>, _>>()?;
        let set = LabelSet::new(names).map_err(|e| Fail::arg(e.to_string()))?;
        *out = Box::into_raw(Box::new(BiascalLabelSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must come from `biascal_label_set_new` (or be null) and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn biascal_label_set_free(set: *mut BiascalLabelSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of labels, or 0 for a null handle.
///
/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn biascal_label_set_len(set: *const BiascalLabelSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Mock backend from a JSON association table
/// `{"model": "...", "base": [..], "assoc": {"word": [..]}}`.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_backend_mock_from_json(
    json: *const c_char,
    out: *mut *mut BiascalBackend,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let json = str_arg(json, "json")?;
        let mock = MockBackend::from_json(json, "mock")
            .map_err(|e| Fail(BiascalStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(BiascalBackend(Arc::new(mock))));
        Ok(())
    })
}

/// Backend for an OpenAI-compatible completions server. `api_key` and
/// `cache_dir` may be null; `timeout_secs` and `parallelism` of 0 select
/// the defaults.
///
/// # Safety
/// String arguments must be valid C strings or null where allowed; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_backend_remote_new(
    endpoint: *const c_char,
    model: *const c_char,
    api_key: *const c_char,
    timeout_secs: u64,
    parallelism: usize,
    cache_dir: *const c_char,
    out: *mut *mut BiascalBackend,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let defaults = RemoteOptions::default();
        let opts = RemoteOptions {
            endpoint: str_arg(endpoint, "endpoint")?.to_string(),
            model: str_arg(model, "model")?.to_string(),
            api_key: opt_str_arg(api_key, "api_key")?.map(str::to_string),
            timeout: if timeout_secs == 0 {
                defaults.timeout
            } else {
                Duration::from_secs(timeout_secs)
            },
            parallelism: if parallelism == 0 {
                defaults.parallelism
            } else {
                parallelism
            },
            ..defaults
        };
        let inner: Arc<dyn Backend> = Arc::new(RemoteBackend::new(opts));
        let backend: Arc<dyn Backend> = match opt_str_arg(cache_dir, "cache_dir")? {
            Some(dir) => Arc::new(CachedBackend::new(inner, PathBuf::from(dir))),
            None => inner,
        };
        *out = Box::into_raw(Box::new(BiascalBackend(backend)));
        Ok(())
    })
}

/// # Safety
/// `backend` must come from a `biascal_backend_*` constructor (or be null)
/// and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn biascal_backend_free(backend: *mut BiascalBackend) {
    if !backend.is_null() {
        drop(Box::from_raw(backend));
    }
}

/// Normalized label probabilities for `prompt`, written to `out_probs`
/// (capacity `out_len`, which must be at least the label count).
///
/// # Safety
/// Handles must be live; `prompt` a valid C string; `out_probs` writable
/// for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn biascal_score(
    backend: *const BiascalBackend,
    prompt: *const c_char,
    labels: *const BiascalLabelSet,
    out_probs: *mut f64,
    out_len: usize,
) -> BiascalStatus {
    guard(|| {
        let backend = backend
            .as_ref()
            .ok_or_else(|| Fail(BiascalStatus::NullPointer, "backend is null".into()))?;
        let labels = labels
            .as_ref()
            .ok_or_else(|| Fail(BiascalStatus::NullPointer, "labels is null".into()))?;
        let prompt = str_arg(prompt, "prompt")?;
        if out_probs.is_null() {
            return Err(Fail(BiascalStatus::NullPointer, "out_probs is null".into()));
        }
        if out_len < labels.0.len() {
            return Err(Fail(
                BiascalStatus::BufferTooSmall,
                format!("need {} slots, got {out_len}", labels.0.len()),
            ));
        }
        let scores = score_labels(backend.0.as_ref(), prompt, &labels.0)
            .map_err(|e| Fail(BiascalStatus::Backend, e.to_string()))?;
        let out = std::slice::from_raw_parts_mut(out_probs, scores.len());
        out.copy_from_slice(scores.probs());
        Ok(())
    })
}

/// Index of the largest probability (ties: lowest index).
///
/// # Safety
/// `probs` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_predict_uncalibrated(
    probs: *const f64,
    n: usize,
    out: *mut usize,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let probs = slice_arg(probs, n, "probs")?;
        if probs.is_empty() {
            return Err(Fail::arg("no labels"));
        }
        *out = argmax(probs);
        Ok(())
    })
}

/// Index maximizing `probs[y] / prior[y]`, with the prior floored at a
/// tiny positive value.
///
/// # Safety
/// `probs` and `prior` must each hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_calibrated_predict(
    probs: *const f64,
    prior: *const f64,
    n: usize,
    out: *mut usize,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let probs = slice_arg(probs, n, "probs")?;
        let prior = slice_arg(prior, n, "prior")?;
        if probs.is_empty() {
            return Err(Fail::arg("no labels"));
        }
        *out = calibrated_argmax(probs, prior)
            .map_err(|e| Fail(BiascalStatus::Calibration, e.to_string()))?;
        Ok(())
    })
}

/// Half the L1 distance between two label distributions.
///
/// # Safety
/// `p_eng` and `p_id` must each hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_bias_from_priors(
    p_eng: *const f64,
    p_id: *const f64,
    n: usize,
    out: *mut f64,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = slice_arg(p_eng, n, "p_eng")?;
        let b = slice_arg(p_id, n, "p_id")?;
        *out = bias_from_priors(a, b);
        Ok(())
    })
}

/// Macro-averaged F1 over `n_classes` classes.
///
/// # Safety
/// `preds` and `golds` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_macro_f1(
    preds: *const usize,
    golds: *const usize,
    n: usize,
    n_classes: usize,
    out: *mut f64,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = slice_arg(preds, n, "preds")?;
        let g = slice_arg(golds, n, "golds")?;
        *out = macro_f1(p, g, n_classes).map_err(|e| Fail::arg(e.to_string()))?;
        Ok(())
    })
}

/// Pearson correlation of two equal-length series.
///
/// # Safety
/// `a` and `b` must each hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn biascal_pearson(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut f64,
) -> BiascalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        *out = pearson(a, b).map_err(|e| Fail::arg(e.to_string()))?;
        Ok(())
    })
}

/// Run an evaluation from a TOML run file and write its reports.
/// `out_dir` may be null to use the file's setting. The number of failed
/// cells is stored in `out_failed_cells`; the call still returns `Ok` when
/// only some cells failed.
///
/// # Safety
/// `config_path` must be a valid C string, `out_dir` a valid C string or
/// null, and `out_failed_cells` writable or null.
#[no_mangle]
pub unsafe extern "C" fn biascal_eval_run(
    config_path: *const c_char,
    out_dir: *const c_char,
    out_failed_cells: *mut usize,
) -> BiascalStatus {
    guard(|| {
        let config = str_arg(config_path, "config_path")?;
        let out_dir = opt_str_arg(out_dir, "out_dir")?;
        let config_err = |e: &dyn std::fmt::Display| Fail(BiascalStatus::Config, e.to_string());
        let mut spec = RunFile::load(config.as_ref())
            .and_then(|f| f.resolve())
            .map_err(|e| config_err(&e))?;
        if let Some(dir) = out_dir {
            spec.out_dir = PathBuf::from(dir);
        }
        let report = run_eval(&spec).map_err(|e| config_err(&e))?;
        write_eval_report(&report, &spec.out_dir)
            .map_err(|e| Fail(BiascalStatus::Io, e.to_string()))?;
        if let Some(n) = out_failed_cells.as_mut() {
            *n = report.errors.len();
        }
        Ok(())
    })
}
