//! C ABI for the asdedu pipeline.
//!
//! Every fallible function returns an [`AsdStatus`]. On failure a message
//! is available from [`asd_last_error`] on the same thread. Handles are
//! opaque; each `*_load`/`*_parse` call must be paired with its `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::OnceLock;

use asdedu::classifiers::TrainedModel;
use asdedu::data_model::{load_dataset, AVector, ColumnAliases, DatasetSchema};
use asdedu::evaluation::{confusion_matrix, metrics, observed_classes, Averaging};
use asdedu::rules::{assign_label, MethodLabel, RuleSet};
use asdedu::Error;

/// Label written for records that could not be predicted.
pub const ASD_NO_LABEL: u32 = u32::MAX;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Data = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    PartialFailure = 8,
    Panic = 9,
}

/// A trained model loaded from its JSON file.
pub struct AsdModel {
    inner: TrainedModel,
}

/// A first-match labeling rule set.
pub struct AsdRuleSet {
    inner: RuleSet,
}

/// Aggregate scores over the observed classes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AsdMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> AsdStatus {
    match e.root() {
        Error::Io { .. } => AsdStatus::Io,
        Error::Csv(_)
        | Error::Json(_)
        | Error::RuleSyntax { .. }
        | Error::ModelFormat(_)
        | Error::VersionMismatch { .. }
        | Error::Config(_) => AsdStatus::Parse,
        Error::InvalidParam(_)
        | Error::InvalidRule(_)
        | Error::DimensionMismatch { .. }
        | Error::UnknownLabel(_) => AsdStatus::InvalidArgument,
        _ => AsdStatus::Data,
    }
}

fn fail(status: AsdStatus, message: impl Into<String>) -> AsdStatus {
    set_error(message);
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<AsdStatus, (AsdStatus, String)>) -> AsdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => fail(status, message),
        Err(_) => fail(AsdStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> (AsdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (AsdStatus, String) {
    (AsdStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AsdStatus, String)> {
    if p.is_null() {
        return Err(null_err(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            AsdStatus::InvalidUtf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

unsafe fn slice_arg<'a, T>(
    p: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (AsdStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_err(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// is valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn asd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Display name of a method label code (0..=6), or NULL.
#[no_mangle]
pub extern "C" fn asd_method_name(code: u32) -> *const c_char {
    static NAMES: OnceLock<Vec<CString>> = OnceLock::new();
    let names = NAMES.get_or_init(|| {
        MethodLabel::ALL
            .iter()
            .map(|m| CString::new(m.name()).expect("names have no NUL"))
            .collect()
    });
    names.get(code as usize).map_or(ptr::null(), |s| s.as_ptr())
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asd_model_load(path: *const c_char, out: *mut *mut AsdModel) -> AsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let inner = TrainedModel::load_from_path(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsdModel { inner }));
        Ok(AsdStatus::Ok)
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asd_model_from_json(
    json: *const c_char,
    out: *mut *mut AsdModel,
) -> AsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        let inner = TrainedModel::from_json(json).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsdModel { inner }));
        Ok(AsdStatus::Ok)
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asd_model_free(model: *mut AsdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of encoded features the model expects.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asd_model_n_features(
    model: *const AsdModel,
    out: *mut usize,
) -> AsdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_err("model"))?;
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = model.inner.feature_names.len();
        Ok(AsdStatus::Ok)
    })
}

/// Model type identifier (`naive_bayes`, `decision_tree`, `random_forest`
/// or `knn`) as a static string, or NULL for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asd_model_kind(model: *const AsdModel) -> *const c_char {
    match model.as_ref() {
        Some(m) => {
            let id: &'static CStr = match m.inner.kind().id() {
                "naive_bayes" => c"naive_bayes",
                "decision_tree" => c"decision_tree",
                "random_forest" => c"random_forest",
                _ => c"knn",
            };
            id.as_ptr()
        }
        None => ptr::null(),
    }
}

/// Predicts one encoded, unscaled feature row of length `len`.
///
/// # Safety
/// `row` must point to `len` doubles; `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn asd_model_predict_row(
    model: *const AsdModel,
    row: *const f64,
    len: usize,
    out_label: *mut u32,
) -> AsdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_err("model"))?;
        let out = out_label.as_mut().ok_or_else(|| null_err("out_label"))?;
        let row = slice_arg(row, len, "row")?;
        *out = model.inner.predict_encoded_row(row).map_err(lib_err)?;
        Ok(AsdStatus::Ok)
    })
}

/// Predicts every record of a screening CSV given as text.
///
/// Writes one label per data row to `out_labels` and the row count to
/// `out_len`. Rows that fail to parse or encode get [`ASD_NO_LABEL`] and
/// the call returns `PARTIAL_FAILURE`. When `capacity` is too small,
/// nothing is written to `out_labels`, `out_len` holds the needed size
/// and `BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `csv` must be a NUL-terminated string, `out_labels` must have room for
/// `capacity` values and `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn asd_model_predict_csv(
    model: *const AsdModel,
    csv: *const c_char,
    out_labels: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> AsdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_err("model"))?;
        let out_len = out_len.as_mut().ok_or_else(|| null_err("out_len"))?;
        let csv = str_arg(csv, "csv")?;
        let (ds, report) = load_dataset(
            csv.as_bytes(),
            &DatasetSchema::canonical(),
            &ColumnAliases::new(),
            "ffi",
        )
        .map_err(lib_err)?;

        let total = report.rows_accepted + report.rows_rejected;
        *out_len = total;
        if capacity < total {
            return Err((
                AsdStatus::BufferTooSmall,
                format!("{total} rows need a buffer of {total}, got {capacity}"),
            ));
        }
        if out_labels.is_null() {
            return Err(null_err("out_labels"));
        }
        let labels = std::slice::from_raw_parts_mut(out_labels, total);

        let mut accepted = ds.rows().iter();
        let mut first_error = None;
        for (row, slot) in labels.iter_mut().enumerate() {
            let result = match report.row_errors.iter().find(|e| e.row == row) {
                Some(e) => Err(format!("row {row} `{}`: {}", e.column, e.message)),
                None => {
                    let r = accepted.next().expect("accepted rows stay in order");
                    model
                        .inner
                        .predict_record(r)
                        .map_err(|e| format!("row {row}: {e}"))
                }
            };
            *slot = match result {
                Ok(label) => label,
                Err(msg) => {
                    first_error.get_or_insert(msg);
                    ASD_NO_LABEL
                }
            };
        }
        match first_error {
            Some(msg) => Err((AsdStatus::PartialFailure, msg)),
            None => Ok(AsdStatus::Ok),
        }
    })
}

/// The built-in rule set.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asd_ruleset_builtin(out: *mut *mut AsdRuleSet) -> AsdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = Box::into_raw(Box::new(AsdRuleSet {
            inner: RuleSet::canonical(),
        }));
        Ok(AsdStatus::Ok)
    })
}

/// Parses a rule set from rule-file text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn asd_ruleset_parse(
    text: *const c_char,
    out: *mut *mut AsdRuleSet,
) -> AsdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let inner = RuleSet::parse(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AsdRuleSet { inner }));
        Ok(AsdStatus::Ok)
    })
}

/// Releases a rule set. NULL is ignored.
///
/// # Safety
/// `rules` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asd_ruleset_free(rules: *mut AsdRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Labels one answer vector of ten 0/1 values (A1 first).
///
/// # Safety
/// `answers` must point to 10 bytes; `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn asd_ruleset_assign(
    rules: *const AsdRuleSet,
    answers: *const u8,
    out_label: *mut u32,
) -> AsdStatus {
    guard(|| {
        let rules = rules.as_ref().ok_or_else(|| null_err("rules"))?;
        let out = out_label.as_mut().ok_or_else(|| null_err("out_label"))?;
        let answers = slice_arg(answers, 10, "answers")?;
        let a = AVector::new(answers.try_into().expect("length is 10")).map_err(lib_err)?;
        *out = assign_label(&a, &rules.inner).code();
        Ok(AsdStatus::Ok)
    })
}

/// Accuracy and averaged precision, recall and F1 for `n` label pairs.
/// `weighted` selects support weighting instead of the macro mean.
///
/// # Safety
/// `y_true` and `y_pred` must point to `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn asd_metrics(
    y_true: *const u32,
    y_pred: *const u32,
    n: usize,
    weighted: bool,
    out: *mut AsdMetrics,
) -> AsdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        let y_true = slice_arg(y_true, n, "y_true")?;
        let y_pred = slice_arg(y_pred, n, "y_pred")?;
        let averaging = if weighted {
            Averaging::Weighted
        } else {
            Averaging::Macro
        };
        let classes = observed_classes(y_true, y_pred);
        let cm = confusion_matrix(y_true, y_pred, &classes).map_err(lib_err)?;
        let m = metrics(&cm, averaging).map_err(lib_err)?;
        *out = AsdMetrics {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        Ok(AsdStatus::Ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = asd_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn builtin_rules_label_through_the_abi() {
        let mut rs = ptr::null_mut();
        unsafe {
            assert_eq!(asd_ruleset_builtin(&mut rs), AsdStatus::Ok);
            let mut label = 99;
            let a = [0u8, 0, 0, 0, 1, 0, 0, 0, 1, 0];
            assert_eq!(
                asd_ruleset_assign(rs, a.as_ptr(), &mut label),
                AsdStatus::Ok
            );
            assert_eq!(label, 1);
            let bad = [2u8, 0, 0, 0, 0, 0, 0, 0, 0, 0];
            assert_eq!(
                asd_ruleset_assign(rs, bad.as_ptr(), &mut label),
                AsdStatus::InvalidArgument
            );
            asd_ruleset_free(rs);
        }
    }

    #[test]
    fn null_arguments_are_reported() {
        let mut label = 0;
        let status = unsafe { asd_ruleset_assign(ptr::null(), ptr::null(), &mut label) };
        assert_eq!(status, AsdStatus::NullPointer);
        assert!(last_error().contains("rules"));
    }

    #[test]
    fn rule_syntax_error_sets_message() {
        let mut rs = ptr::null_mut();
        let status = unsafe { asd_ruleset_parse(c"1: A11=1".as_ptr(), &mut rs) };
        assert_eq!(status, AsdStatus::Parse);
        assert!(rs.is_null());
        assert!(last_error().contains("line 1"));
    }

    #[test]
    fn success_clears_the_error() {
        let mut rs = ptr::null_mut();
        unsafe {
            asd_ruleset_parse(c"nonsense".as_ptr(), &mut rs);
            assert_eq!(asd_ruleset_builtin(&mut rs), AsdStatus::Ok);
            assert!(asd_last_error().is_null());
            asd_ruleset_free(rs);
        }
    }

    #[test]
    fn method_names() {
        let name = unsafe { CStr::from_ptr(asd_method_name(6)) };
        assert_eq!(name.to_str().unwrap(), "Task Analysis");
        assert!(asd_method_name(7).is_null());
    }

    #[test]
    fn worked_metric_example() {
        let y_true = [0u32, 1, 1];
        let y_pred = [0u32, 0, 1];
        let mut m = AsdMetrics::default();
        let status = unsafe { asd_metrics(y_true.as_ptr(), y_pred.as_ptr(), 3, false, &mut m) };
        assert_eq!(status, AsdStatus::Ok);
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.75).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn version_string() {
        let v = unsafe { CStr::from_ptr(asd_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
