//! C ABI over the extended factor graph library.
//!
//! Every function returns an [`EfgStatus`]. On failure a message is kept per
//! thread and can be read with [`efg_last_error`]. Models are opaque handles
//! created by [`efg_model_parse`] or [`efg_model_convert`] and released with
//! [`efg_model_free`]. Strings returned by the library are released with
//! [`efg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use efg::convert::{fg_to_bn, fg_to_mrf};
use efg::inference::{marginal, InferenceError, Method};
use efg::{parse_model, separated, serialize_model, Evidence, FactorGraph, IndependenceQuery, ModelFile};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    InvalidArgument = 5,
    ZeroMass = 6,
    NotATree = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfgKind {
    FactorGraph = 0,
    BayesNet = 1,
    MarkovNet = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfgMethod {
    Enumerate = 0,
    SumProduct = 1,
}

/// A parsed model together with its factor graph form.
pub struct EfgModel {
    file: ModelFile,
    graph: FactorGraph,
}

impl EfgModel {
    fn new(file: ModelFile) -> Result<Self, Failure> {
        let graph = file
            .to_factor_graph()
            .map_err(|e| Failure(EfgStatus::ValidationError, e.to_string()))?;
        Ok(Self { file, graph })
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EfgStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(EfgStatus::NullPointer, format!("`{what}` is null"))
    }

    fn argument(e: impl ToString) -> Self {
        Failure(EfgStatus::InvalidArgument, e.to_string())
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        let status = match e {
            InferenceError::ZeroMass => EfgStatus::ZeroMass,
            InferenceError::NotATree => EfgStatus::NotATree,
            _ => EfgStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EfgStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => EfgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EfgStatus::Panic
        }
    }
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EfgStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn text_list(p: *const *const c_char, len: usize, what: &str) -> Result<Vec<String>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .map(|&s| utf8(s, what).map(str::to_string))
        .collect()
}

unsafe fn handle<'a>(p: *const EfgModel) -> Result<&'a EfgModel, Failure> {
    p.as_ref().ok_or_else(|| Failure::null("model"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

/// Message for the most recent failure on this thread, or null after a
/// success. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn efg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Parses fgx, bn or mrf text into a new model handle.
///
/// # Safety
/// `text` must be a nul-terminated string and `out_model` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn efg_model_parse(text: *const c_char, out_model: *mut *mut EfgModel) -> EfgStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let source = utf8(text, "text")?;
        let file = parse_model(source).map_err(|e| {
            let status = if e.is_validation() {
                EfgStatus::ValidationError
            } else {
                EfgStatus::ParseError
            };
            Failure(status, e.to_string())
        })?;
        *slot = Box::into_raw(Box::new(EfgModel::new(file)?));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn efg_model_free(model: *mut EfgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Kind of file the model was read as.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn efg_model_kind(model: *const EfgModel, out_kind: *mut EfgKind) -> EfgStatus {
    guard(|| {
        let m = handle(model)?;
        *out(out_kind, "out_kind")? = match m.file {
            ModelFile::FactorGraph(_) => EfgKind::FactorGraph,
            ModelFile::BayesNet(_) => EfgKind::BayesNet,
            ModelFile::MarkovNet(_) => EfgKind::MarkovNet,
        };
        Ok(())
    })
}

/// Variable, function and edge counts of the factor graph form.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn efg_model_counts(
    model: *const EfgModel,
    out_variables: *mut usize,
    out_functions: *mut usize,
    out_edges: *mut usize,
) -> EfgStatus {
    guard(|| {
        let stats = handle(model)?.graph.structure_stats();
        *out(out_variables, "out_variables")? = stats.variables;
        *out(out_functions, "out_functions")? = stats.functions;
        *out(out_edges, "out_edges")? = stats.edges();
        Ok(())
    })
}

/// Canonical text of the model. Free the result with `efg_string_free`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn efg_model_serialize(model: *const EfgModel, out_text: *mut *mut c_char) -> EfgStatus {
    guard(|| {
        let slot = out(out_text, "out_text")?;
        *slot = ptr::null_mut();
        let text = serialize_model(&handle(model)?.file);
        *slot = CString::new(text).map_err(Failure::argument)?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn efg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Converts the model to another representation as a new handle.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn efg_model_convert(
    model: *const EfgModel,
    target: EfgKind,
    out_model: *mut *mut EfgModel,
) -> EfgStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let m = handle(model)?;
        let invalid = |e: efg::ConvertError| Failure(EfgStatus::ValidationError, e.to_string());
        let file = match target {
            EfgKind::FactorGraph => ModelFile::FactorGraph(m.graph.clone()),
            EfgKind::BayesNet => match &m.file {
                ModelFile::BayesNet(bn) => ModelFile::BayesNet(bn.clone()),
                _ => ModelFile::BayesNet(fg_to_bn(&m.graph).map_err(invalid)?),
            },
            EfgKind::MarkovNet => match &m.file {
                ModelFile::MarkovNet(mrf) => ModelFile::MarkovNet(mrf.clone()),
                _ => ModelFile::MarkovNet(fg_to_mrf(&m.graph).map_err(invalid)?),
            },
        };
        *slot = Box::into_raw(Box::new(EfgModel::new(file)?));
        Ok(())
    })
}

/// Local normalization check at tolerance `tol`.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn efg_check_normalization(
    model: *const EfgModel,
    tol: f64,
    out_passed: *mut bool,
    out_worst_deviation: *mut f64,
) -> EfgStatus {
    guard(|| {
        if tol.is_nan() || tol < 0.0 {
            return Err(Failure::argument("tolerance must be non-negative"));
        }
        let report = handle(model)?.graph.check_local_normalization(tol);
        *out(out_passed, "out_passed")? = report.passed();
        *out(out_worst_deviation, "out_worst_deviation")? = report.worst_deviation();
        Ok(())
    })
}

/// Whether every path between the `x` and `y` sets is blocked given `given`.
///
/// # Safety
/// Each array must hold `len` nul-terminated strings; arrays may be null
/// when their length is zero.
#[no_mangle]
pub unsafe extern "C" fn efg_separated(
    model: *const EfgModel,
    x: *const *const c_char,
    x_len: usize,
    y: *const *const c_char,
    y_len: usize,
    given: *const *const c_char,
    given_len: usize,
    out_separated: *mut bool,
) -> EfgStatus {
    guard(|| {
        let m = handle(model)?;
        let query = IndependenceQuery::new(
            text_list(x, x_len, "x")?,
            text_list(y, y_len, "y")?,
            text_list(given, given_len, "given")?,
        );
        let verdict = separated(&m.graph, &query).map_err(Failure::argument)?;
        *out(out_separated, "out_separated")? = verdict.is_separated();
        Ok(())
    })
}

/// Writes `P(variable | evidence)` into `out_values`. When `capacity` is too
/// small nothing is written except `out_len`, and `BufferTooSmall` is
/// returned.
///
/// # Safety
/// `evidence_names` and `evidence_states` must each hold `evidence_len`
/// entries; `out_values` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn efg_marginal(
    model: *const EfgModel,
    variable: *const c_char,
    evidence_names: *const *const c_char,
    evidence_states: *const usize,
    evidence_len: usize,
    method: EfgMethod,
    out_values: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EfgStatus {
    guard(|| {
        let m = handle(model)?;
        let var = utf8(variable, "variable")?;
        let names = text_list(evidence_names, evidence_len, "evidence_names")?;
        let states: &[usize] = if evidence_len == 0 {
            &[]
        } else if evidence_states.is_null() {
            return Err(Failure::null("evidence_states"));
        } else {
            std::slice::from_raw_parts(evidence_states, evidence_len)
        };
        let evidence = names
            .into_iter()
            .zip(states)
            .fold(Evidence::new(), |ev, (n, &s)| ev.with(n, s));
        let method = match method {
            EfgMethod::Enumerate => Method::Enumerate,
            EfgMethod::SumProduct => Method::SumProduct,
        };
        let values = marginal(&m.graph, var, &evidence, method)?;
        *out(out_len, "out_len")? = values.len();
        if capacity < values.len() {
            return Err(Failure(
                EfgStatus::BufferTooSmall,
                format!("need room for {} values, got {capacity}", values.len()),
            ));
        }
        if out_values.is_null() {
            return Err(Failure::null("out_values"));
        }
        std::slice::from_raw_parts_mut(out_values, values.len()).copy_from_slice(&values);
        Ok(())
    })
}
