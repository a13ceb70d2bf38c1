//! C interface to the fuzzkb query answering engine.
//!
//! Handles are opaque and must be released with the matching `*_free`
//! function. Every fallible call returns a [`FuzzkbStatus`]; on failure a
//! message is available from [`fuzzkb_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fuzzkb::eval::answer;
use fuzzkb::fuzzy::{tconorm, tnorm, TNormKind};
use fuzzkb::kb::Vocab;
use fuzzkb::model::{load_checkpoint, ParameterStore};
use fuzzkb::query::parse_query;
use fuzzkb::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzkbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Query = 5,
    Checkpoint = 6,
    Invalid = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzkbTnorm {
    Godel = 0,
    Product = 1,
    Lukasiewicz = 2,
}

impl From<FuzzkbTnorm> for TNormKind {
    fn from(t: FuzzkbTnorm) -> Self {
        match t {
            FuzzkbTnorm::Godel => TNormKind::Godel,
            FuzzkbTnorm::Product => TNormKind::Product,
            FuzzkbTnorm::Lukasiewicz => TNormKind::Lukasiewicz,
        }
    }
}

/// A trained model together with the vocabulary it was trained on.
pub struct FuzzkbModel {
    params: ParameterStore,
    vocab: Vocab,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FuzzkbStatus {
    match e {
        Error::Io { .. } => FuzzkbStatus::Io,
        Error::Parse { .. } | Error::NamespaceCollision { .. } => FuzzkbStatus::Parse,
        Error::QuerySyntax { .. } | Error::UnknownName { .. } | Error::Unsupported(_) => FuzzkbStatus::Query,
        Error::Checkpoint(_) => FuzzkbStatus::Checkpoint,
        _ => FuzzkbStatus::Invalid,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (FuzzkbStatus, String)>) -> FuzzkbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FuzzkbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FuzzkbStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FuzzkbStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (FuzzkbStatus, String)> {
    if p.is_null() {
        return Err((FuzzkbStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FuzzkbStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Opens a model from a knowledge-base directory (containing
/// `vocab.json`) and a checkpoint file.
///
/// # Safety
/// `kb_dir` and `checkpoint` must be NUL-terminated strings and `out` a
/// valid pointer. On success `*out` owns a handle for
/// [`fuzzkb_model_free`].
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_model_open(
    kb_dir: *const c_char,
    checkpoint: *const c_char,
    out: *mut *mut FuzzkbModel,
) -> FuzzkbStatus {
    guard(|| {
        if out.is_null() {
            return Err((FuzzkbStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let dir = str_arg(kb_dir, "kb_dir")?;
        let ck = str_arg(checkpoint, "checkpoint")?;
        let vocab = Vocab::load(&Path::new(dir).join("vocab.json")).map_err(lib_err)?;
        let params = load_checkpoint(Path::new(ck)).map_err(lib_err)?;
        if params.num_entities() != vocab.num_entities()
            || params.num_concepts() != vocab.num_concepts()
            || params.num_relations() != vocab.num_relations()
        {
            return Err((
                FuzzkbStatus::Checkpoint,
                "checkpoint shapes do not match the vocabulary".into(),
            ));
        }
        *out = Box::into_raw(Box::new(FuzzkbModel { params, vocab }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`fuzzkb_model_open`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_model_free(model: *mut FuzzkbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_model_num_entities(model: *const FuzzkbModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.num_entities())
}

/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_model_num_concepts(model: *const FuzzkbModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.num_concepts())
}

/// Answers a query written in the s-expression syntax, producing a JSON
/// array of `{level, id, name, score}` objects: the top `k` entities then
/// the top `k` concepts.
///
/// # Safety
/// `model` must be a live handle, `query` a NUL-terminated string and
/// `out_json` a valid pointer. The string written to `*out_json` must be
/// released with [`fuzzkb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_answer_json(
    model: *const FuzzkbModel,
    query: *const c_char,
    k: u32,
    out_json: *mut *mut c_char,
) -> FuzzkbStatus {
    guard(|| {
        if out_json.is_null() {
            return Err((FuzzkbStatus::NullArgument, "out_json is null".into()));
        }
        *out_json = ptr::null_mut();
        let m = model
            .as_ref()
            .ok_or((FuzzkbStatus::NullArgument, "model is null".to_string()))?;
        let text = str_arg(query, "query")?;
        let q = parse_query(text, &m.vocab).map_err(lib_err)?;
        let rows = answer(&m.params, &m.vocab, &q, k as usize).map_err(lib_err)?;
        let json = serde_json::to_string(&rows).expect("rows serialize");
        *out_json = CString::new(json).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on the calling thread, or null.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fuzzkb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Applies a t-norm (`disjunction == 0`) or its dual t-conorm to two
/// membership degrees in [0, 1].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fuzzkb_tnorm(
    kind: FuzzkbTnorm,
    disjunction: u8,
    x: f64,
    y: f64,
    out: *mut f64,
) -> FuzzkbStatus {
    guard(|| {
        if out.is_null() {
            return Err((FuzzkbStatus::NullArgument, "out is null".into()));
        }
        let f = if disjunction == 0 { tnorm } else { tconorm };
        *out = f(kind.into(), x, y).map_err(lib_err)?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fuzzkb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
