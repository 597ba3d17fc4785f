//! C ABI for oracle-rank.
//!
//! Every fallible function returns an [`OracleRankStatus`] and writes its
//! result through an out-pointer. On failure a message is available from
//! [`oracle_rank_last_error`] on the same thread. Handles are opaque and must
//! be released with their matching `_free` function; strings returned by the
//! library are released with [`oracle_rank_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use oracle_rank::corpus::{ingest_corpus, CorpusError};
use oracle_rank::features::tfidf_cosine;
use oracle_rank::iforest::{ForestParams, IsolationForest};
use oracle_rank::metrics::{found_at_k, BugRankOutcome, FirstTpRank};
use oracle_rank::pipeline::{self, PipelineConfig, PipelineError, RankingMethod};
use oracle_rank::stats::{cliffs_delta, wilcoxon_signed_rank, Magnitude};
use oracle_rank::trace::parse_trace;
use oracle_rank::Corpus;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRankStatus {
    Ok = 0,
    NullArg = 1,
    InvalidArg = 2,
    Io = 3,
    Parse = 4,
    Data = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRankRanking {
    Iforest = 0,
    Random = 1,
    None = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRankMagnitude {
    Negligible = 0,
    Small = 1,
    Medium = 2,
    Large = 3,
}

/// Opaque validated corpus.
pub struct OracleRankCorpus(Corpus);

/// Opaque fitted isolation forest.
pub struct OracleRankForest {
    forest: IsolationForest,
    cols: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (OracleRankStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OracleRankStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OracleRankStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OracleRankStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (OracleRankStatus::NullArg, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    (OracleRankStatus::InvalidArg, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn corpus_failure(e: CorpusError) -> Failure {
    let status = match e {
        CorpusError::Io { .. } => OracleRankStatus::Io,
        CorpusError::Malformed { .. } => OracleRankStatus::Parse,
        _ => OracleRankStatus::Data,
    };
    (status, e.to_string())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Config(m) => invalid(m),
        PipelineError::Corpus(c) => corpus_failure(c),
        PipelineError::Io { .. } => (OracleRankStatus::Io, e.to_string()),
        other => (OracleRankStatus::Data, other.to_string()),
    }
}

/// Message of the last failed call on this thread, or "" after a success.
/// Valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn oracle_rank_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn oracle_rank_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads and joins a records file and an outcomes file (JSON lines).
///
/// # Safety
/// Paths must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_corpus_ingest(
    records_path: *const c_char,
    outcomes_path: *const c_char,
    out: *mut *mut OracleRankCorpus,
) -> OracleRankStatus {
    guard(|| {
        let records = str_arg(records_path, "records_path")?;
        let outcomes = str_arg(outcomes_path, "outcomes_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let corpus = ingest_corpus(Path::new(records), Path::new(outcomes)).map_err(corpus_failure)?;
        write_out(out, Box::into_raw(Box::new(OracleRankCorpus(corpus))), "out")
    })
}

/// Number of entries, or 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_corpus_len(corpus: *const OracleRankCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Number of distinct bugs, or 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_corpus_bug_count(corpus: *const OracleRankCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.bug_ids().len())
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_corpus_free(corpus: *mut OracleRankCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Runs the full evaluation and returns the report as JSON. `ranking` is an
/// [`OracleRankRanking`] value. Free the string with
/// [`oracle_rank_string_free`].
///
/// # Safety
/// `ks` and `seeds` must point to `n_ks` and `n_seeds` values; `out_json`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_evaluate(
    corpus: *const OracleRankCorpus,
    ks: *const usize,
    n_ks: usize,
    seeds: *const u64,
    n_seeds: usize,
    ranking: i32,
    baseline_noexception: bool,
    out_json: *mut *mut c_char,
) -> OracleRankStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let cfg = PipelineConfig {
            k_values: slice_arg(ks, n_ks, "ks")?.to_vec(),
            seeds: slice_arg(seeds, n_seeds, "seeds")?.to_vec(),
            ranking: match ranking {
                r if r == OracleRankRanking::Iforest as i32 => RankingMethod::Iforest,
                r if r == OracleRankRanking::Random as i32 => RankingMethod::Random,
                r if r == OracleRankRanking::None as i32 => RankingMethod::None,
                r => return Err(invalid(format!("unknown ranking {r}"))),
            },
            baseline_noexception,
            ..PipelineConfig::default()
        };
        let eval = pipeline::evaluate(&corpus.0, &cfg).map_err(pipeline_failure)?;
        write_out(out_json, owned_string(pipeline::report_json(&eval.report)), "out_json")
    })
}

/// Fits a forest on `n_rows` row-major rows of `n_cols` values.
/// `subsample_size` 0 means min(256, n_rows).
///
/// # Safety
/// `rows` must hold `n_rows * n_cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_forest_fit(
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    num_trees: usize,
    subsample_size: usize,
    seed: u64,
    out: *mut *mut OracleRankForest,
) -> OracleRankStatus {
    guard(|| {
        if n_rows == 0 || n_cols == 0 {
            return Err(invalid("need at least one row and one column"));
        }
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("matrix too large"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = slice_arg(rows, len, "rows")?;
        let rows: Vec<&[f64]> = data.chunks(n_cols).collect();
        let params = ForestParams {
            num_trees,
            subsample_size: (subsample_size > 0).then_some(subsample_size),
        };
        let forest = IsolationForest::fit(&rows, &params, seed).map_err(|e| invalid(e.to_string()))?;
        write_out(
            out,
            Box::into_raw(Box::new(OracleRankForest { forest, cols: n_cols })),
            "out",
        )
    })
}

/// Anomaly score of one row, in (0, 1).
///
/// # Safety
/// `row` must hold `n_cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_forest_score(
    forest: *const OracleRankForest,
    row: *const f64,
    n_cols: usize,
    out: *mut f64,
) -> OracleRankStatus {
    guard(|| {
        let f = forest.as_ref().ok_or_else(|| null("forest"))?;
        if n_cols != f.cols {
            return Err(invalid(format!(
                "row has {n_cols} columns, forest was fit on {}",
                f.cols
            )));
        }
        let row = slice_arg(row, n_cols, "row")?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(invalid("row has a non-finite value"));
        }
        write_out(out, f.forest.score(row), "out")
    })
}

/// # Safety
/// `forest` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_forest_free(forest: *mut OracleRankForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

/// TF-IDF cosine similarity of two texts.
///
/// # Safety
/// Both texts must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_tfidf_cosine(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> OracleRankStatus {
    guard(|| {
        let (a, b) = (str_arg(a, "a")?, str_arg(b, "b")?);
        write_out(out, tfidf_cosine(a, b), "out")
    })
}

/// Two-sided Wilcoxon signed-rank test on `n` pairs.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_wilcoxon(
    a: *const f64,
    b: *const f64,
    n: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> OracleRankStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, n, "a")?, slice_arg(b, n, "b")?);
        let w = wilcoxon_signed_rank(a, b).map_err(|e| invalid(e.to_string()))?;
        write_out(statistic, w.statistic, "statistic")?;
        write_out(p_value, w.p_value, "p_value")
    })
}

/// Cliff's delta of `a` (length `n`) against `b` (length `m`).
///
/// # Safety
/// `a` and `b` must hold `n` and `m` doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_cliffs_delta(
    a: *const f64,
    n: usize,
    b: *const f64,
    m: usize,
    delta: *mut f64,
    magnitude: *mut OracleRankMagnitude,
) -> OracleRankStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, n, "a")?, slice_arg(b, m, "b")?);
        let e = cliffs_delta(a, b).map_err(|e| invalid(e.to_string()))?;
        write_out(delta, e.delta, "delta")?;
        let band = match e.magnitude {
            Magnitude::Negligible => OracleRankMagnitude::Negligible,
            Magnitude::Small => OracleRankMagnitude::Small,
            Magnitude::Medium => OracleRankMagnitude::Medium,
            Magnitude::Large => OracleRankMagnitude::Large,
        };
        write_out(magnitude, band, "magnitude")
    })
}

/// Found@K over `n_bugs` bugs given each bug's 1-based first-TP rank, with 0
/// meaning the bug has no TP.
///
/// # Safety
/// `first_tp_ranks` must hold `n_bugs` values; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_found_at_k(
    first_tp_ranks: *const usize,
    n_bugs: usize,
    k: usize,
    count: *mut usize,
    fraction: *mut f64,
) -> OracleRankStatus {
    guard(|| {
        let ranks = slice_arg(first_tp_ranks, n_bugs, "first_tp_ranks")?;
        let outcomes: Vec<BugRankOutcome> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| BugRankOutcome {
                bug_id: i.to_string(),
                first_tp_rank: if r == 0 { FirstTpRank::Never } else { FirstTpRank::At(r) },
            })
            .collect();
        let f = found_at_k(&outcomes, k).map_err(|e| invalid(e.to_string()))?;
        write_out(count, f.count, "count")?;
        write_out(fraction, f.fraction, "fraction")
    })
}

/// Simple name of the outermost exception in a stack trace. Free the result
/// with [`oracle_rank_string_free`].
///
/// # Safety
/// `raw_trace` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oracle_rank_trace_exception(
    raw_trace: *const c_char,
    out: *mut *mut c_char,
) -> OracleRankStatus {
    guard(|| {
        let raw = str_arg(raw_trace, "raw_trace")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = parse_trace(raw).map_err(|e| (OracleRankStatus::Parse, e.to_string()))?;
        write_out(out, owned_string(t.exception_simple_name), "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, OracleRankStatus::Panic);
        let msg = unsafe { CStr::from_ptr(oracle_rank_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }

    #[test]
    fn success_clears_error() {
        set_error("old");
        assert_eq!(guard(|| Ok(())), OracleRankStatus::Ok);
        assert!(unsafe { CStr::from_ptr(oracle_rank_last_error()) }
            .to_bytes()
            .is_empty());
    }

    #[test]
    fn null_out_pointer() {
        let mut p: *mut OracleRankCorpus = ptr::null_mut();
        let s = unsafe { oracle_rank_corpus_ingest(ptr::null(), c"x".as_ptr(), &mut p) };
        assert_eq!(s, OracleRankStatus::NullArg);
        assert!(p.is_null());
    }
}
