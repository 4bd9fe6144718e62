//! C ABI for dialfact.
//!
//! # Conventions
//!
//! Every fallible function returns a [`DialfactStatus`]; `DIALFACT_STATUS_OK`
//! is zero. Results come back through out-pointers, which are left
//! untouched on failure. After a failure, [`dialfact_last_error`] returns a
//! message for the calling thread until its next failing call.
//!
//! Strings passed in must be NUL-terminated UTF-8. Strings handed out are
//! owned by the caller and released with [`dialfact_string_free`]. A corpus
//! is an opaque handle released with [`dialfact_corpus_free`].
//!
//! Panics never cross the boundary; they surface as
//! `DIALFACT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use dialfact::adapters::{
    gold_labels, predictions_to_jsonl, prediction_records, Detector, PredictionFileDetector, PredictionRecord,
};
use dialfact::dataset::{corpus_stats, load_corpus, parse_corpus, Corpus};
use dialfact::enderanker::{EnDeRanker, PreparedContext, RankerConfig, ScoreError, SequenceScorer};
use dialfact::lingo::{map_role_to_class, AnnotatorProvider, SemanticRole};
use dialfact::registry::Registry;
use dialfact::ErrorClass;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialfactStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Scorer = 6,
    Panic = 7,
}

/// Mirrors the label inventory; values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialfactClass {
    NoError = 0,
    EntE = 1,
    PredE = 2,
    CirE = 3,
    CorefE = 4,
    LinkE = 5,
    Others = 6,
}

impl From<ErrorClass> for DialfactClass {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::NoError => DialfactClass::NoError,
            ErrorClass::EntE => DialfactClass::EntE,
            ErrorClass::PredE => DialfactClass::PredE,
            ErrorClass::CirE => DialfactClass::CirE,
            ErrorClass::CorefE => DialfactClass::CorefE,
            ErrorClass::LinkE => DialfactClass::LinkE,
            ErrorClass::Others => DialfactClass::Others,
        }
    }
}

/// Opaque corpus handle.
pub struct DialfactCorpus {
    inner: Corpus,
}

/// Scores one token sequence. Writes `n_tokens` natural-log probabilities
/// (each <= 0) to `out_logprobs` and returns 0, or returns non-zero to
/// abort. `context` is the flattened dialogue. Called on the thread that
/// invoked [`dialfact_detect_json`], never concurrently.
pub type DialfactScorerFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        dialogue_id: *const c_char,
        context: *const c_char,
        tokens: *const *const c_char,
        n_tokens: usize,
        out_logprobs: *mut f64,
    ) -> c_int,
>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DialfactStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DialfactStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DialfactStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DialfactStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DialfactStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DialfactStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn corpus_arg<'a>(p: *const DialfactCorpus) -> Result<&'a Corpus, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null("corpus"))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(DialfactStatus::InvalidArgument, e.to_string()))?;
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(c.into_raw());
    Ok(())
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version string"),
};

/// Library version; static, do not free.
#[no_mangle]
pub extern "C" fn dialfact_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message of the calling thread's most recent failure, or null. Valid
/// until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn dialfact_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dialfact_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_corpus_load(path: *const c_char, out: *mut *mut DialfactCorpus) -> DialfactStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let inner = load_corpus(Path::new(path)).map_err(|e| {
            let status = if Path::new(path).exists() { DialfactStatus::Parse } else { DialfactStatus::Io };
            Failure(status, e.to_string())
        })?;
        put(out, Box::into_raw(Box::new(DialfactCorpus { inner })))
    })
}

/// Parses a corpus from JSON-lines text.
///
/// # Safety
/// `jsonl` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_corpus_parse(jsonl: *const c_char, out: *mut *mut DialfactCorpus) -> DialfactStatus {
    guard(|| {
        let text = str_arg(jsonl, "jsonl")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let inner = parse_corpus("<memory>", text).map_err(|e| Failure(DialfactStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(DialfactCorpus { inner })))
    })
}

/// Number of summary sentences; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dialfact_corpus_len(corpus: *const DialfactCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `corpus` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn dialfact_corpus_free(corpus: *mut DialfactCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Corpus statistics as a JSON object.
///
/// # Safety
/// `corpus` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_corpus_stats_json(corpus: *const DialfactCorpus, out_json: *mut *mut c_char) -> DialfactStatus {
    guard(|| {
        let c = corpus_arg(corpus)?;
        let stats = corpus_stats(c).map_err(|e| Failure(DialfactStatus::InvalidArgument, e.to_string()))?;
        put_string(out_json, serde_json::to_string(&stats).expect("stats serialize"))
    })
}

/// Class implied by a semantic role label and the span filling it.
///
/// # Safety
/// `span` and `role` must be valid C strings, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_map_role_to_class(
    span: *const c_char,
    role: *const c_char,
    out: *mut DialfactClass,
) -> DialfactStatus {
    guard(|| {
        let span = str_arg(span, "span")?;
        let role = str_arg(role, "role")?;
        put(out, map_role_to_class(span, &SemanticRole::new(role)).into())
    })
}

/// Class of an erroneous dependency arc of the given type.
///
/// # Safety
/// `arc_type` must be a valid C string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_dae_arc_class(arc_type: *const c_char, out: *mut DialfactClass) -> DialfactStatus {
    guard(|| {
        let t = str_arg(arc_type, "arc_type")?;
        put(out, dialfact::adapters::dae_arc_class(t).into())
    })
}

/// Rank of the original among its variants: one plus the number of
/// candidate scores strictly greater than `soi_score`.
///
/// # Safety
/// `candidates` must point to `n` doubles (may be null when `n` is 0).
#[no_mangle]
pub unsafe extern "C" fn dialfact_rank_from_scores(
    soi_score: f64,
    candidates: *const f64,
    n: usize,
    out_rank: *mut usize,
) -> DialfactStatus {
    guard(|| {
        let cands = if n == 0 {
            &[][..]
        } else if candidates.is_null() {
            return Err(null("candidates"));
        } else {
            std::slice::from_raw_parts(candidates, n)
        };
        if soi_score.is_nan() || cands.iter().any(|c| c.is_nan()) {
            return Err(Failure(DialfactStatus::InvalidArgument, "NaN score".into()));
        }
        put(out_rank, dialfact::enderanker::rank_from_scores(soi_score, cands))
    })
}

/// Cohen's kappa between two integer-coded annotations of `n` items.
///
/// # Safety
/// `a` and `b` must each point to `n` values.
#[no_mangle]
pub unsafe extern "C" fn dialfact_cohens_kappa(a: *const i64, b: *const i64, n: usize, out: *mut f64) -> DialfactStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(null("annotation"));
        }
        let (a, b) = (std::slice::from_raw_parts(a, n), std::slice::from_raw_parts(b, n));
        let k = dialfact::metrics::cohens_kappa(a, b).map_err(|e| Failure(DialfactStatus::InvalidArgument, e.to_string()))?;
        put(out, k)
    })
}

/// Scores JSON-lines predictions against the corpus gold labels and
/// returns the evaluation report as JSON.
///
/// # Safety
/// `corpus` must be a live handle, `predictions_jsonl` a valid C string and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dialfact_evaluate_json(
    corpus: *const DialfactCorpus,
    predictions_jsonl: *const c_char,
    merge_linke: bool,
    out_json: *mut *mut c_char,
) -> DialfactStatus {
    guard(|| {
        let c = corpus_arg(corpus)?;
        let text = str_arg(predictions_jsonl, "predictions_jsonl")?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: PredictionRecord =
                serde_json::from_str(line).map_err(|e| Failure(DialfactStatus::Parse, format!("line {}: {e}", i + 1)))?;
            records.push(r);
        }
        let det = PredictionFileDetector::from_records("predictions", records);
        let invalid = |e: &dyn std::fmt::Display| Failure(DialfactStatus::InvalidArgument, e.to_string());
        let preds: Vec<_> = det.predict_all(&c.examples).map_err(|e| invalid(&e))?.into_iter().map(|p| p.labels).collect();
        let golds = gold_labels(&c.examples).map_err(|e| invalid(&e))?;
        let report = dialfact::metrics::evaluate(&preds, &golds, merge_linke).map_err(|e| invalid(&e))?;
        put_string(out_json, serde_json::to_string(&report).expect("report serializes"))
    })
}

struct CallbackScorer {
    f: unsafe extern "C" fn(*mut c_void, *const c_char, *const c_char, *const *const c_char, usize, *mut f64) -> c_int,
    user_data: *mut c_void,
}

// The ranker only calls a scorer from several threads when it reports
// `concurrent_safe`; this one does not, so calls stay on the caller's thread.
unsafe impl Send for CallbackScorer {}
unsafe impl Sync for CallbackScorer {}

impl SequenceScorer for CallbackScorer {
    fn name(&self) -> &str {
        "callback"
    }

    fn token_logprobs(&self, context: &PreparedContext, tokens: &[String]) -> Result<Vec<f64>, ScoreError> {
        let bad = |m: &str| ScoreError::scorer("callback", m);
        let id = CString::new(context.dialogue_id.as_str()).map_err(|_| bad("NUL in dialogue id"))?;
        let ctx = CString::new(context.text.as_str()).map_err(|_| bad("NUL in context"))?;
        let owned: Vec<CString> =
            tokens.iter().map(|t| CString::new(t.as_str())).collect::<Result<_, _>>().map_err(|_| bad("NUL in token"))?;
        let ptrs: Vec<*const c_char> = owned.iter().map(|c| c.as_ptr()).collect();
        let mut out = vec![f64::NAN; tokens.len()];
        let rc = unsafe { (self.f)(self.user_data, id.as_ptr(), ctx.as_ptr(), ptrs.as_ptr(), ptrs.len(), out.as_mut_ptr()) };
        if rc != 0 {
            return Err(bad(&format!("callback returned {rc}")));
        }
        Ok(out)
    }

    fn concurrent_safe(&self) -> bool {
        false
    }
}

fn run_detect(
    corpus: &Corpus,
    scorer: Arc<dyn SequenceScorer>,
    provider: Arc<dyn AnnotatorProvider>,
    threshold_t: usize,
    merge_linke: bool,
) -> Result<String, Failure> {
    if threshold_t == 0 {
        return Err(Failure(DialfactStatus::InvalidArgument, "threshold_t must be at least 1".into()));
    }
    let cfg = RankerConfig { threshold_t, merge_linke, ..RankerConfig::default() };
    let preds = EnDeRanker::new(scorer, provider, cfg)
        .detect_examples(&corpus.examples)
        .map_err(|e| Failure(DialfactStatus::Scorer, e.to_string()))?;
    Ok(predictions_to_jsonl(&prediction_records(&corpus.examples, &preds)))
}

fn provider_by_id(id: &str) -> Result<Arc<dyn AnnotatorProvider>, Failure> {
    Registry::default().provider(id).map_err(|e| Failure(DialfactStatus::InvalidArgument, e.to_string()))
}

/// Runs the ranking detector with a caller-supplied scorer and returns
/// JSON-lines predictions (with per-span diagnostics). `provider_id` names
/// a built-in annotator (`heuristic`, `fixture:PATH`); null means
/// `heuristic`.
///
/// # Safety
/// `corpus` must be a live handle, `provider_id` null or a valid C string,
/// `out_jsonl` a valid pointer; `scorer` must honour [`DialfactScorerFn`].
#[no_mangle]
pub unsafe extern "C" fn dialfact_detect_json(
    corpus: *const DialfactCorpus,
    scorer: DialfactScorerFn,
    user_data: *mut c_void,
    provider_id: *const c_char,
    threshold_t: usize,
    merge_linke: bool,
    out_jsonl: *mut *mut c_char,
) -> DialfactStatus {
    guard(|| {
        let c = corpus_arg(corpus)?;
        let f = scorer.ok_or_else(|| null("scorer"))?;
        let provider = provider_by_id(if provider_id.is_null() { "heuristic" } else { str_arg(provider_id, "provider_id")? })?;
        let jsonl = run_detect(c, Arc::new(CallbackScorer { f, user_data }), provider, threshold_t, merge_linke)?;
        put_string(out_jsonl, jsonl)
    })
}

/// Like [`dialfact_detect_json`] with a built-in scorer (`mock`,
/// `mock:TABLE.json`, `overlap`).
///
/// # Safety
/// As for [`dialfact_detect_json`]; `scorer_id` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn dialfact_detect_builtin_json(
    corpus: *const DialfactCorpus,
    scorer_id: *const c_char,
    provider_id: *const c_char,
    threshold_t: usize,
    merge_linke: bool,
    out_jsonl: *mut *mut c_char,
) -> DialfactStatus {
    guard(|| {
        let c = corpus_arg(corpus)?;
        let scorer = Registry::default()
            .scorer(str_arg(scorer_id, "scorer_id")?)
            .map_err(|e| Failure(DialfactStatus::InvalidArgument, e.to_string()))?;
        let provider = provider_by_id(if provider_id.is_null() { "heuristic" } else { str_arg(provider_id, "provider_id")? })?;
        put_string(out_jsonl, run_detect(c, scorer, provider, threshold_t, merge_linke)?)
    })
}
